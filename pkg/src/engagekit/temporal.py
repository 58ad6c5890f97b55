"""Window splitting, segment recognition, merging, and peer-context aggregation.

This is the middle stage of the pipeline: an untrimmed per-student window is
cut into fixed non-overlapping segments, a recognizer labels each segment,
and consecutive identical labels are fused into a timestamped action
sequence. Peer streams are reduced to a classroom-context timeline by
frame-wise majority vote per time bin.
"""

from __future__ import annotations

from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Protocol, Sequence, Union

from .core import (
    ActionDictionary,
    ActionSegment,
    ActionSequence,
    ClassroomWindow,
    FrameLabelStream,
    TimeSpan,
    _validate_segments,
    fuse_segments,
    timeline_frames,
)
from .errors import ContextUnavailableError, DataError, TransportError


@dataclass(frozen=True)
class WindowingConfig:
    """Non-overlapping segmentation of a window.

    ``frames_per_clip`` is how many frames a recognizer sees per segment;
    segments shorter than that are sampled with repetition.
    """

    segment_seconds: float = 5.0
    frames_per_clip: int = 32

    def __post_init__(self):
        if not self.segment_seconds > 0:
            raise DataError(f"segment_seconds must be positive, got {self.segment_seconds}")
        if self.frames_per_clip < 1:
            raise DataError(f"frames_per_clip must be >= 1, got {self.frames_per_clip}")

    def frames_per_segment(self, fps: float) -> int:
        return max(1, round(self.segment_seconds * fps))


@dataclass(frozen=True)
class RecognizerVerdict:
    """One segment-level decision, optionally with per-class probabilities."""

    label: int
    scores: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.scores is not None:
            scores = tuple(float(s) for s in self.scores)
            object.__setattr__(self, "scores", scores)
            if abs(sum(scores) - 1.0) > 1e-6:
                raise DataError(f"scores must sum to 1, got {sum(scores)}")
            best = max(range(len(scores)), key=lambda i: (scores[i], -i))
            if self.label != best:
                raise DataError(
                    f"label {self.label} is not the argmax of scores (expected {best})"
                )


@dataclass(frozen=True)
class SegmentClip:
    """What a recognizer sees for one segment of one student's window."""

    clip_id: str
    span: TimeSpan
    frame_labels: tuple[int, ...]
    dictionary: ActionDictionary
    frames_per_clip: int = 32


class RecognizerPort(Protocol):
    def recognize(self, clip: SegmentClip) -> RecognizerVerdict: ...


def sample_frame_offsets(n_frames: int, k: int) -> list[int]:
    """k uniformly spaced offsets into [0, n_frames); repeats when n < k."""
    return [(i * n_frames) // k for i in range(k)]


class OracleRecognizer:
    """Echoes the modal ground-truth label of each clip (lowest id on ties)."""

    def recognize(self, clip: SegmentClip) -> RecognizerVerdict:
        counts = Counter(clip.frame_labels)
        label = min(counts, key=lambda lab: (-counts[lab], lab))
        return RecognizerVerdict(label=label)


def split_windows(stream: FrameLabelStream, cfg: WindowingConfig) -> list[TimeSpan]:
    """Cut the window into contiguous non-overlapping spans.

    All spans have ``segment_seconds`` worth of frames except possibly a
    shorter tail.
    """
    n = stream.n_frames
    if n == 0:
        raise DataError("cannot split an empty stream")
    step = cfg.frames_per_segment(stream.fps)
    spans = []
    for start in range(0, n, step):
        spans.append(TimeSpan(start, min(start + step, n), stream.fps))
    return spans


def clips_for_spans(
    stream: FrameLabelStream,
    spans: Sequence[TimeSpan],
    dictionary: ActionDictionary,
    cfg: WindowingConfig,
    clip_prefix: str = "",
) -> list[SegmentClip]:
    clips = []
    for span in spans:
        clips.append(
            SegmentClip(
                clip_id=f"{clip_prefix}{span.start_frame}-{span.end_frame}",
                span=span,
                frame_labels=stream.labels[span.start_frame : span.end_frame],
                dictionary=dictionary,
                frames_per_clip=cfg.frames_per_clip,
            )
        )
    return clips


def recognize_segments(
    clips: Sequence[SegmentClip],
    recognizer: RecognizerPort,
    max_workers: int = 4,
) -> list[RecognizerVerdict]:
    """One verdict per clip, in clip order.

    Calls run on a bounded thread pool (remote recognizers overlap I/O);
    results are reassembled by position. Any failure aborts the whole
    window, reporting every failed span rather than leaving silent gaps.
    """
    if not clips:
        return []
    verdicts: list[RecognizerVerdict | None] = [None] * len(clips)
    failures: list[tuple[str, Exception]] = []
    if max_workers <= 1:
        for i, clip in enumerate(clips):
            try:
                verdicts[i] = recognizer.recognize(clip)
            except Exception as exc:  # noqa: BLE001 - collected and re-raised
                failures.append((clip.clip_id, exc))
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            futures = [pool.submit(recognizer.recognize, clip) for clip in clips]
            for i, future in enumerate(futures):
                try:
                    verdicts[i] = future.result()
                except Exception as exc:  # noqa: BLE001
                    failures.append((clips[i].clip_id, exc))
    if failures:
        detail = "; ".join(f"{cid}: {exc}" for cid, exc in failures)
        raise TransportError(f"{len(failures)} segment(s) failed recognition: {detail}")
    return verdicts  # type: ignore[return-value]


def merge_verdicts(
    spans: Sequence[TimeSpan],
    verdicts: Sequence[RecognizerVerdict],
    student_id: str = "",
) -> ActionSequence:
    """Fuse consecutive identical predictions into an ordered action sequence."""
    if len(spans) != len(verdicts):
        raise DataError(f"{len(spans)} spans but {len(verdicts)} verdicts")
    if not spans:
        raise DataError("cannot merge zero spans")
    segments = [ActionSegment(v.label, span) for span, v in zip(spans, verdicts)]
    return ActionSequence.fuse(segments, student_id)


@dataclass(frozen=True)
class ContextTimeline:
    """Majority peer action over each time bin, fused like a sequence."""

    segments: tuple[ActionSegment, ...]

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        _validate_segments(self.segments, fused=True)

    @property
    def fps(self) -> float:
        return self.segments[0].span.fps

    @property
    def n_frames(self) -> int:
        return self.segments[-1].span.end_frame

    def to_frames(self) -> tuple[int, ...]:
        labels: list[int] = []
        for seg in self.segments:
            labels.extend([seg.label] * seg.span.n_frames)
        return tuple(labels)


def aggregate_context(window: ClassroomWindow, bin_seconds: float = 5.0) -> ContextTimeline:
    """Frame-wise modal peer action per bin, ties to the lowest label id.

    Peers are weighted equally; the result is invariant to peer order and to
    duplicating the whole peer set. Adjacent equal bins are fused.
    """
    if not window.peers:
        raise ContextUnavailableError(
            f"window {window.window_id} has no peers to derive context from"
        )
    if not bin_seconds > 0:
        raise DataError(f"bin_seconds must be positive, got {bin_seconds}")
    fps = window.fps
    n = window.n_frames
    peer_frames = [timeline_frames(p) for p in window.peers]
    step = max(1, round(bin_seconds * fps))
    segments = []
    for start in range(0, n, step):
        end = min(start + step, n)
        counts: Counter[int] = Counter()
        for frames in peer_frames:
            counts.update(frames[start:end])
        label = min(counts, key=lambda lab: (-counts[lab], lab))
        segments.append(ActionSegment(label, TimeSpan(start, end, fps)))
    return ContextTimeline(fuse_segments(segments))


@dataclass(frozen=True)
class ActionHistogram:
    """Seconds spent per action label; order-free summary of a window."""

    seconds_per_label: Mapping[int, float]
    total_seconds: float

    def __post_init__(self):
        object.__setattr__(self, "seconds_per_label", dict(self.seconds_per_label))


SegmentedTimeline = Union[ActionSequence, ContextTimeline]


def to_histogram(seq: SegmentedTimeline) -> ActionHistogram:
    """Accumulate each label's total duration across segments."""
    seconds: dict[int, float] = {}
    for seg in seq.segments:
        seconds[seg.label] = seconds.get(seg.label, 0.0) + seg.span.duration_seconds
    total = seq.segments[-1].span.end_frame / seq.fps
    return ActionHistogram(seconds, total)


def render_sequence_text(seq: SegmentedTimeline, dictionary: ActionDictionary) -> str:
    """Serialize segments as ``name (mm:ss-mm:ss)`` entries joined by ``; ``."""
    parts = []
    for seg in seq.segments:
        name = dictionary.label_by_id(seg.label).name
        parts.append(f"{name} ({seg.span.render()})")
    return "; ".join(parts)


def render_histogram_text(hist: ActionHistogram, dictionary: ActionDictionary) -> str:
    """Serialize a histogram as ``name: Ns`` entries, largest share first."""
    items = sorted(hist.seconds_per_label.items(), key=lambda kv: (-kv[1], kv[0]))
    parts = []
    for label, seconds in items:
        name = dictionary.label_by_id(label).name
        parts.append(f"{name}: {seconds:g} s")
    return "; ".join(parts)
