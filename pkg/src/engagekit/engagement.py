"""Engagement classification: prompt construction, endpoint dispatch, verdict
parsing, and a deterministic rule baseline for endpoint-free runs.

Prompt text lives in data files under ``templates/`` so variants stay
diffable; the context-free variant differs from the context-based one only
by the elided context material, keeping ablations apples-to-apples.
"""

from __future__ import annotations

import os
import re
import time
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from importlib.resources import files
from pathlib import Path
from typing import Callable, Sequence

import requests

from .core import ActionDictionary, ActionSequence, EngagementLabel, timeline_frames
from .errors import ConfigError, TransportError, VerdictParseError
from .temporal import (
    ContextTimeline,
    render_histogram_text,
    render_sequence_text,
    to_histogram,
)

TOKEN_ENV_VAR = "ENGAGEKIT_API_TOKEN"

_DISENGAGED_RE = re.compile(r"\b(?:dis[-\s]?engaged|not\s+engaged)\b", re.IGNORECASE)
_ENGAGED_RE = re.compile(r"\bengaged\b", re.IGNORECASE)


class PromptVariant(str, Enum):
    CONTEXT_BASED = "context"
    CONTEXT_FREE = "context-free"


class InputRepresentation(str, Enum):
    SEQUENCE = "sequence"
    HISTOGRAM = "histogram"


class ParseConfidence(str, Enum):
    EXACT = "exact"
    EXTRACTED = "extracted"


@dataclass(frozen=True)
class PromptBundle:
    task_description: str
    input_block: str
    full_prompt: str
    variant: PromptVariant
    temperature: float = 0.1

    def __post_init__(self):
        expected = f"{self.task_description}\n\n{self.input_block}"
        if self.full_prompt != expected:
            raise ConfigError("full_prompt must be task description + input block")


@dataclass(frozen=True)
class EngagementVerdict:
    label: EngagementLabel
    raw_response: str
    parse_confidence: ParseConfidence


def _load_template(variant: PromptVariant, template_dir: Path | None) -> str:
    name = "context_based.txt" if variant is PromptVariant.CONTEXT_BASED else "context_free.txt"
    if template_dir is not None:
        return (Path(template_dir) / name).read_text(encoding="utf-8")
    return (files("engagekit") / "templates" / name).read_text(encoding="utf-8")


def _split_template(template: str, variant: PromptVariant) -> tuple[str, str]:
    lines = template.splitlines()
    first = next((i for i, ln in enumerate(lines) if "{STUDENT_ACTIONS}" in ln), None)
    if first is None:
        raise ConfigError("template lacks the {STUDENT_ACTIONS} placeholder")
    if variant is PromptVariant.CONTEXT_BASED and not any(
        "{CLASSROOM_CONTEXT}" in ln for ln in lines
    ):
        raise ConfigError("context-based template lacks {CLASSROOM_CONTEXT}")
    if variant is PromptVariant.CONTEXT_FREE and any(
        "{CLASSROOM_CONTEXT}" in ln for ln in lines
    ):
        raise ConfigError("context-free template must not mention classroom context")
    description = "\n".join(lines[:first]).rstrip()
    input_layout = "\n".join(lines[first:]).strip()
    return description, input_layout


def build_prompt(
    target_seq: ActionSequence,
    context: ContextTimeline | None,
    dictionary: ActionDictionary,
    variant: PromptVariant,
    representation: InputRepresentation = InputRepresentation.SEQUENCE,
    temperature: float = 0.1,
    template_dir: Path | None = None,
) -> PromptBundle:
    """Deterministically render the classification prompt for one window."""
    variant = PromptVariant(variant)
    representation = InputRepresentation(representation)
    if variant is PromptVariant.CONTEXT_BASED and context is None:
        raise ConfigError("context-based prompting requires a context timeline")

    if representation is InputRepresentation.SEQUENCE:
        student_text = render_sequence_text(target_seq, dictionary)
        context_text = (
            render_sequence_text(context, dictionary) if context is not None else ""
        )
    else:
        student_text = render_histogram_text(to_histogram(target_seq), dictionary)
        context_text = (
            render_histogram_text(to_histogram(context), dictionary)
            if context is not None
            else ""
        )

    description, input_layout = _split_template(
        _load_template(variant, template_dir), variant
    )
    input_block = input_layout.replace("{STUDENT_ACTIONS}", student_text)
    input_block = input_block.replace("{CLASSROOM_CONTEXT}", context_text)
    return PromptBundle(
        task_description=description,
        input_block=input_block,
        full_prompt=f"{description}\n\n{input_block}",
        variant=variant,
        temperature=temperature,
    )


def parse_verdict(raw: str) -> EngagementVerdict:
    """Scan a response for an engagement label.

    The disengaged family ("disengaged", "dis-engaged", "not engaged") takes
    precedence, since responses mentioning it may also contain the bare
    "engaged" token. Confidence is exact only when the trimmed response is
    the label itself.
    """
    trimmed = raw.strip().lower()
    if trimmed in (EngagementLabel.ENGAGED.value, EngagementLabel.DISENGAGED.value):
        return EngagementVerdict(EngagementLabel(trimmed), raw, ParseConfidence.EXACT)
    if _DISENGAGED_RE.search(raw):
        return EngagementVerdict(
            EngagementLabel.DISENGAGED, raw, ParseConfidence.EXTRACTED
        )
    if _ENGAGED_RE.search(raw):
        return EngagementVerdict(EngagementLabel.ENGAGED, raw, ParseConfidence.EXTRACTED)
    raise VerdictParseError(
        f"no engagement label found in response: {raw!r}", raw_response=raw
    )


@dataclass(frozen=True)
class ClassifierEndpoint:
    """Chat-completion-style endpoint settings. The bearer token is read from
    the environment, never from flags or files."""

    url: str
    model: str
    token_env: str = TOKEN_ENV_VAR
    timeout_seconds: float = 30.0
    max_attempts: int = 3
    backoff_seconds: float = 0.5


Transport = Callable[[dict, dict], tuple[int, object]]
_TRANSIENT_STATUS = {429, 500, 502, 503, 504}


def _http_transport(endpoint: ClassifierEndpoint) -> Transport:
    def post(payload: dict, headers: dict) -> tuple[int, object]:
        resp = requests.post(
            endpoint.url, json=payload, headers=headers, timeout=endpoint.timeout_seconds
        )
        try:
            body: object = resp.json()
        except ValueError:
            body = resp.text
        return resp.status_code, body

    return post


def classify_remote(
    bundle: PromptBundle,
    endpoint: ClassifierEndpoint,
    transport: Transport | None = None,
) -> EngagementVerdict:
    """Send one single-turn request and parse the label out of the reply.

    Transient failures (connection errors, 429, 5xx) are retried with
    bounded exponential backoff; anything else fails fast.
    """
    payload = {
        "model": endpoint.model,
        "temperature": bundle.temperature,
        "messages": [{"role": "user", "content": bundle.full_prompt}],
    }
    headers = {"Content-Type": "application/json"}
    token = os.environ.get(endpoint.token_env, "")
    if token:
        headers["Authorization"] = f"Bearer {token}"
    post = transport if transport is not None else _http_transport(endpoint)

    last_error = "no attempt made"
    for attempt in range(endpoint.max_attempts):
        if attempt:
            time.sleep(endpoint.backoff_seconds * 2 ** (attempt - 1))
        try:
            status, body = post(payload, headers)
        except requests.RequestException as exc:
            last_error = f"connection failed: {exc}"
            continue
        if status in _TRANSIENT_STATUS:
            last_error = f"transient HTTP {status}"
            continue
        if status != 200:
            raise TransportError(f"classifier endpoint returned HTTP {status}: {body!r}")
        return parse_verdict(_extract_content(body))
    raise TransportError(
        f"classifier endpoint unreachable after {endpoint.max_attempts} attempts: {last_error}"
    )


def _extract_content(body: object) -> str:
    try:
        return body["choices"][0]["message"]["content"]  # type: ignore[index]
    except (KeyError, IndexError, TypeError) as exc:
        raise TransportError(f"malformed chat-completion response: {body!r}") from exc


@dataclass(frozen=True)
class BaselineParams:
    """Rule-based classifier knobs. These are harness defaults chosen to make
    the context and ordering effects visible, not measured constants."""

    on_task_names: tuple[str, ...] = (
        "writing on notebook/tablet",
        "typing on a laptop",
        "reading",
        "listening",
        "raising hand",
    )
    ambiguous_names: tuple[str, ...] = (
        "typing on a laptop",
        "looking at laptop screen (not typing)",
    )
    on_task_threshold: float = 0.7
    min_block_seconds: float = 20.0
    max_switches: int = 3
    ambiguous_base: float = 0.7
    context_adjustment: float = 0.15


def classify_baseline(
    target_seq: ActionSequence,
    context: ContextTimeline | None,
    dictionary: ActionDictionary,
    params: BaselineParams = BaselineParams(),
    representation: InputRepresentation = InputRepresentation.SEQUENCE,
) -> EngagementVerdict:
    """Deterministic engagement rule used as an offline stand-in classifier.

    A student is engaged when their context-weighted on-task fraction reaches
    the threshold and they do not rack up too many short off-task
    interruptions. Ambiguous laptop-facing actions count more when the
    classroom context agrees with them and less when it conflicts. The
    histogram representation sees durations only, so the interruption rule
    cannot apply there. All arithmetic is exact (rational), so verdicts are
    reproducible across platforms.
    """
    representation = InputRepresentation(representation)
    on_task = {dictionary.label_by_name(n).id for n in params.on_task_names}
    ambiguous = {dictionary.label_by_name(n).id for n in params.ambiguous_names}
    base = Fraction(str(params.ambiguous_base))
    adjust = Fraction(str(params.context_adjustment))
    threshold = Fraction(str(params.on_task_threshold))

    if representation is InputRepresentation.SEQUENCE:
        fraction, short_interruptions = _sequence_scores(
            target_seq, context, on_task, ambiguous, base, adjust, params
        )
        engaged = fraction >= threshold and short_interruptions < params.max_switches
        detail = (
            f"on-task fraction {float(fraction):.4f}; "
            f"short off-task interruptions {short_interruptions}"
        )
    else:
        fraction = _histogram_score(target_seq, context, on_task, ambiguous, base, adjust)
        engaged = fraction >= threshold
        detail = f"on-task fraction {float(fraction):.4f} (histogram)"

    label = EngagementLabel.ENGAGED if engaged else EngagementLabel.DISENGAGED
    return EngagementVerdict(label, f"baseline: {detail}", ParseConfidence.EXACT)


def _frame_weight(
    label: int,
    ctx_label: int | None,
    on_task: set[int],
    ambiguous: set[int],
    base: Fraction,
    adjust: Fraction,
) -> Fraction:
    if label in ambiguous:
        if ctx_label is None:
            return base
        return base + adjust if ctx_label == label else base - adjust
    return Fraction(1) if label in on_task else Fraction(0)


def _sequence_scores(
    target_seq: ActionSequence,
    context: ContextTimeline | None,
    on_task: set[int],
    ambiguous: set[int],
    base: Fraction,
    adjust: Fraction,
    params: BaselineParams,
) -> tuple[Fraction, int]:
    frames = timeline_frames(target_seq)
    ctx_frames: Sequence[int] | None = None
    if context is not None:
        ctx_frames = context.to_frames()
        if len(ctx_frames) != len(frames):
            raise ConfigError(
                f"context covers {len(ctx_frames)} frames but target has {len(frames)}"
            )
    total = Fraction(0)
    for i, lab in enumerate(frames):
        ctx_lab = ctx_frames[i] if ctx_frames is not None else None
        total += _frame_weight(lab, ctx_lab, on_task, ambiguous, base, adjust)
    fraction = total / len(frames)

    min_block_frames = round(params.min_block_seconds * target_seq.fps)
    short_interruptions = 0
    run = 0
    for lab in list(frames) + [-1]:  # sentinel flushes the final run
        if lab >= 0 and lab not in on_task and lab not in ambiguous:
            run += 1
        else:
            if 0 < run < min_block_frames:
                short_interruptions += 1
            run = 0
    return fraction, short_interruptions


def _histogram_score(
    target_seq: ActionSequence,
    context: ContextTimeline | None,
    on_task: set[int],
    ambiguous: set[int],
    base: Fraction,
    adjust: Fraction,
) -> Fraction:
    frames_per_label: dict[int, int] = {}
    for seg in target_seq.segments:
        frames_per_label[seg.label] = (
            frames_per_label.get(seg.label, 0) + seg.span.n_frames
        )
    ctx_share: dict[int, Fraction] = {}
    if context is not None:
        ctx_total = context.n_frames
        for seg in context.segments:
            ctx_share[seg.label] = (
                ctx_share.get(seg.label, Fraction(0))
                + Fraction(seg.span.n_frames, ctx_total)
            )
    total = Fraction(0)
    n_frames = sum(frames_per_label.values())
    for lab, count in frames_per_label.items():
        if lab in ambiguous:
            if context is None:
                weight = base
            else:
                agrees = ctx_share.get(lab, Fraction(0)) >= Fraction(1, 2)
                weight = base + adjust if agrees else base - adjust
        elif lab in on_task:
            weight = Fraction(1)
        else:
            weight = Fraction(0)
        total += weight * count
    return total / n_frames
