"""Evaluation metrics for action parsing and engagement classification.

Segmentation quality is reported frame-wise (MoF) and segment-wise (Edit,
F1@tau). Frame accuracy alone rewards fragmented predictions, so the
segment-based scores are the ones that expose over-segmentation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .core import ActionSequence, EngagementLabel, FrameLabelStream, timeline_frames
from .errors import ConfigError, DataError

DEFAULT_TAUS = (10, 25, 50)


@dataclass(frozen=True)
class SegEvalReport:
    """Segmentation scores in percent: MoF, Edit, and F1 at each tau."""

    mof: float
    edit: float
    f1_at: Mapping[int, float]

    def __post_init__(self):
        object.__setattr__(self, "f1_at", dict(self.f1_at))

    def as_dict(self) -> dict:
        return {
            "mof": self.mof,
            "edit": self.edit,
            "f1": {str(t): v for t, v in sorted(self.f1_at.items())},
        }


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class ClsEvalReport:
    """Per-class and support-weighted precision/recall/F1 in [0, 1]."""

    per_class: Mapping[str, ClassMetrics]
    weighted: ClassMetrics

    def __post_init__(self):
        object.__setattr__(self, "per_class", dict(self.per_class))

    def as_dict(self) -> dict:
        out = {
            name: {
                "precision": m.precision,
                "recall": m.recall,
                "f1": m.f1,
                "support": m.support,
            }
            for name, m in self.per_class.items()
        }
        out["weighted avg"] = {
            "precision": self.weighted.precision,
            "recall": self.weighted.recall,
            "f1": self.weighted.f1,
            "support": self.weighted.support,
        }
        return out


def mof(pred: FrameLabelStream | Sequence[int], gt: FrameLabelStream | Sequence[int]) -> float:
    """Mean over Frames: percentage of frames whose labels agree."""
    p = pred.labels if isinstance(pred, FrameLabelStream) else tuple(pred)
    g = gt.labels if isinstance(gt, FrameLabelStream) else tuple(gt)
    if len(p) != len(g):
        raise DataError(f"frame streams differ in length: {len(p)} vs {len(g)}")
    if not g:
        raise DataError("cannot score empty frame streams")
    matches = sum(1 for a, b in zip(p, g) if a == b)
    return 100.0 * matches / len(g)


def levenshtein(a: Sequence[int], b: Sequence[int]) -> int:
    """Edit distance between two label orders (insert/delete/substitute)."""
    m, n = len(a), len(b)
    prev = list(range(n + 1))
    for i in range(1, m + 1):
        cur = [i] + [0] * n
        for j in range(1, n + 1):
            if a[i - 1] == b[j - 1]:
                cur[j] = prev[j - 1]
            else:
                cur[j] = 1 + min(prev[j], cur[j - 1], prev[j - 1])
        prev = cur
    return prev[n]


def edit_score(pred: ActionSequence, gt: ActionSequence) -> float:
    """Normalized edit similarity between segment label orders, in percent."""
    p, g = pred.label_order, gt.label_order
    dist = levenshtein(p, g)
    return max(0.0, 100.0 * (1.0 - dist / max(len(p), len(g))))


def _iou(a, b) -> float:
    inter = min(a.end_frame, b.end_frame) - max(a.start_frame, b.start_frame)
    if inter <= 0:
        return 0.0
    union = a.n_frames + b.n_frames - inter
    return inter / union


def f1_counts(
    pred: ActionSequence,
    gt: ActionSequence,
    tau: float,
    *,
    inclusive: bool = False,
) -> tuple[int, int, int]:
    """Segment-level (TP, FP, FN) under the IoU-threshold matching rule.

    Each predicted segment, in temporal order, is matched to the unclaimed
    ground-truth segment of the same label with maximal IoU (ties broken by
    earlier start). The match is a true positive only when IoU exceeds
    tau/100 (or reaches it, with ``inclusive``); several predictions over one
    ground-truth segment therefore yield one TP and the rest FPs. Unmatched
    ground-truth segments are FNs.
    """
    threshold = tau / 100.0
    claimed = [False] * len(gt.segments)
    tp = fp = 0
    for p in pred.segments:
        best_j = -1
        best_iou = 0.0
        for j, g in enumerate(gt.segments):
            if claimed[j] or g.label != p.label:
                continue
            iou = _iou(p.span, g.span)
            if iou > best_iou:
                best_iou = iou
                best_j = j
        hit = best_iou >= threshold if inclusive else best_iou > threshold
        if best_j >= 0 and hit:
            claimed[best_j] = True
            tp += 1
        else:
            fp += 1
    fn = claimed.count(False)
    return tp, fp, fn


def f1_from_counts(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    if denom == 0:
        return 100.0
    return 100.0 * 2 * tp / denom


def f1_at_tau(
    pred: ActionSequence,
    gt: ActionSequence,
    tau: float,
    *,
    inclusive: bool = False,
    restrict_taus: bool = True,
) -> float:
    """Segmental F1 at overlap threshold tau (percent), tau in {10, 25, 50}.

    Pass ``restrict_taus=False`` to evaluate at a non-standard threshold.
    """
    if restrict_taus and tau not in DEFAULT_TAUS:
        raise ConfigError(
            f"tau must be one of {DEFAULT_TAUS} (got {tau}); "
            "pass restrict_taus=False to override"
        )
    return f1_from_counts(*f1_counts(pred, gt, tau, inclusive=inclusive))


def seg_report(
    pred: ActionSequence,
    gt: ActionSequence,
    taus: Sequence[int] = DEFAULT_TAUS,
) -> SegEvalReport:
    """Full segmentation report for one window (frames derived from segments)."""
    return SegEvalReport(
        mof=mof(timeline_frames(pred), timeline_frames(gt)),
        edit=edit_score(pred, gt),
        f1_at={t: f1_at_tau(pred, gt, t) for t in taus},
    )


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def classification_report(
    preds: Sequence[EngagementLabel | str],
    gts: Sequence[EngagementLabel | str],
) -> ClsEvalReport:
    """Per-class and support-weighted P/R/F1 over engagement verdicts.

    Empty denominators follow the zero convention (score 0.0).
    """
    if len(preds) != len(gts):
        raise DataError(f"predictions and labels differ in length: {len(preds)} vs {len(gts)}")
    if not gts:
        raise DataError("cannot build a classification report from no samples")
    p = [EngagementLabel(x).value for x in preds]
    g = [EngagementLabel(x).value for x in gts]
    per_class: dict[str, ClassMetrics] = {}
    for cls in (EngagementLabel.DISENGAGED.value, EngagementLabel.ENGAGED.value):
        tp = sum(1 for a, b in zip(p, g) if a == cls and b == cls)
        fp = sum(1 for a, b in zip(p, g) if a == cls and b != cls)
        fn = sum(1 for a, b in zip(p, g) if a != cls and b == cls)
        precision, recall, f1 = _prf(tp, fp, fn)
        per_class[cls] = ClassMetrics(precision, recall, f1, tp + fn)
    total = len(g)
    weighted = ClassMetrics(
        precision=sum(m.precision * m.support for m in per_class.values()) / total,
        recall=sum(m.recall * m.support for m in per_class.values()) / total,
        f1=sum(m.f1 * m.support for m in per_class.values()) / total,
        support=total,
    )
    return ClsEvalReport(per_class, weighted)
