"""Few-shot adaptation objective over precomputed embeddings.

Given a batch of clip-level video embeddings and one text embedding per
action class, class scores are temperature-scaled cosine similarities and
the training objective is mean cross entropy plus a mean entropy regularizer
(both in nats). Only the numerics live here: analytic value and gradient,
plus a central finite-difference checker. No encoders, no optimizer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DegenerateEmbeddingError


@dataclass(frozen=True)
class EmbeddingBatch:
    video_embeddings: np.ndarray  # (N, D)
    class_text_embeddings: np.ndarray  # (C, D)
    labels: np.ndarray  # (N,) ints in [0, C)
    temperature: float

    def __post_init__(self):
        v = np.asarray(self.video_embeddings, dtype=np.float64)
        t = np.asarray(self.class_text_embeddings, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if v.ndim != 2 or t.ndim != 2:
            raise DataError("embeddings must be 2-D arrays")
        n, d = v.shape
        c, d2 = t.shape
        if n < 1 or c < 2 or d < 1 or d != d2:
            raise DataError(
                f"need N>=1, C>=2, matching D; got video {v.shape}, text {t.shape}"
            )
        if y.shape != (n,) or y.min(initial=0) < 0 or y.max(initial=0) >= c:
            raise DataError(f"labels must be {n} class indices in [0, {c})")
        if not self.temperature > 0:
            raise DataError(f"temperature must be positive, got {self.temperature}")
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(t))):
            raise DegenerateEmbeddingError("embeddings contain non-finite values")
        if np.any(np.linalg.norm(v, axis=1) == 0) or np.any(np.linalg.norm(t, axis=1) == 0):
            raise DegenerateEmbeddingError("zero-norm embedding vector")
        object.__setattr__(self, "video_embeddings", v)
        object.__setattr__(self, "class_text_embeddings", t)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.video_embeddings.shape[0]

    @property
    def n_classes(self) -> int:
        return self.class_text_embeddings.shape[0]

    @property
    def dim(self) -> int:
        return self.video_embeddings.shape[1]

    def with_video(self, v: np.ndarray) -> "EmbeddingBatch":
        return EmbeddingBatch(v, self.class_text_embeddings, self.labels, self.temperature)

    def with_text(self, t: np.ndarray) -> "EmbeddingBatch":
        return EmbeddingBatch(self.video_embeddings, t, self.labels, self.temperature)


def _unit_rows(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return x / norms, norms[:, 0]


def cosine_similarities(batch: EmbeddingBatch) -> np.ndarray:
    v_hat, _ = _unit_rows(batch.video_embeddings)
    t_hat, _ = _unit_rows(batch.class_text_embeddings)
    return v_hat @ t_hat.T


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def class_probabilities(batch: EmbeddingBatch) -> np.ndarray:
    """Row i is the softmax over classes of cos(v_i, t_k) / temperature."""
    return np.exp(_log_softmax(cosine_similarities(batch) / batch.temperature))


def loss_terms(batch: EmbeddingBatch) -> tuple[float, float]:
    """(mean cross entropy, mean entropy) of the class distributions, in nats."""
    log_p = _log_softmax(cosine_similarities(batch) / batch.temperature)
    p = np.exp(log_p)
    ce = float(-log_p[np.arange(batch.n), batch.labels].mean())
    entropy = float(-(p * log_p).sum(axis=1).mean())
    return ce, entropy


def total_loss(batch: EmbeddingBatch) -> float:
    ce, entropy = loss_terms(batch)
    return ce + entropy


@dataclass(frozen=True)
class LossGradients:
    video: np.ndarray  # (N, D)
    text: np.ndarray  # (C, D)


def loss_gradient(batch: EmbeddingBatch) -> LossGradients:
    """Analytic gradient of the total loss w.r.t. both embedding sets.

    With s_ik = cos(v_i, t_k) / temperature and p = softmax(s):
    dL/ds_ik = (p_ik - [k == y_i] - p_ik (log p_ik + H_i)) / N, and the
    cosine chain rule projects out the component along each embedding.
    """
    v_hat, v_norms = _unit_rows(batch.video_embeddings)
    t_hat, t_norms = _unit_rows(batch.class_text_embeddings)
    cos = v_hat @ t_hat.T
    log_p = _log_softmax(cos / batch.temperature)
    p = np.exp(log_p)
    entropy = -(p * log_p).sum(axis=1, keepdims=True)

    grad_s = p.copy()
    grad_s[np.arange(batch.n), batch.labels] -= 1.0
    grad_s -= p * (log_p + entropy)
    grad_s /= batch.n

    scale = 1.0 / batch.temperature
    row_dot = (grad_s * cos).sum(axis=1, keepdims=True)
    grad_v = scale * (grad_s @ t_hat - row_dot * v_hat) / v_norms[:, None]
    col_dot = (grad_s * cos).sum(axis=0)[:, None]
    grad_t = scale * (grad_s.T @ v_hat - col_dot * t_hat) / t_norms[:, None]
    return LossGradients(video=grad_v, text=grad_t)


@dataclass(frozen=True)
class GradientCheckResult:
    max_rel_error: float
    passed: bool
    step: float
    rtol: float


def finite_difference_gradients(batch: EmbeddingBatch, step: float = 1e-5) -> LossGradients:
    """Central finite differences of total_loss; independent of loss_gradient."""

    def fd(base: np.ndarray, rebuild) -> np.ndarray:
        grad = np.zeros_like(base)
        for idx in np.ndindex(base.shape):
            bumped = base.copy()
            bumped[idx] = base[idx] + step
            hi = total_loss(rebuild(bumped))
            bumped[idx] = base[idx] - step
            lo = total_loss(rebuild(bumped))
            grad[idx] = (hi - lo) / (2 * step)
        return grad

    return LossGradients(
        video=fd(batch.video_embeddings, batch.with_video),
        text=fd(batch.class_text_embeddings, batch.with_text),
    )


def gradient_check(
    batch: EmbeddingBatch, step: float = 1e-5, rtol: float = 1e-4
) -> GradientCheckResult:
    """Compare analytic gradients against central finite differences.

    Relative error uses a 1e-6 floor in the denominator so that components
    where both sides vanish (dominated by finite-difference noise) do not
    blow up the ratio.
    """
    analytic = loss_gradient(batch)
    numeric = finite_difference_gradients(batch, step=step)
    max_rel = 0.0
    for a, f in ((analytic.video, numeric.video), (analytic.text, numeric.text)):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(f)), 1e-6)
        max_rel = max(max_rel, float((np.abs(a - f) / denom).max()))
    return GradientCheckResult(max_rel, max_rel <= rtol, step, rtol)
