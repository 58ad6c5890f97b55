"""Core domain types for classroom behavior timelines.

Frames are the canonical time unit everywhere; seconds and mm:ss timestamps
are derived presentation forms. All types are immutable values and safe to
share across threads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence, Union

from .errors import ContiguityError, DataError, DictionaryMismatchError

# Canonical action vocabulary for introductory STEM lectures, in fixed id
# order 0..12. Names are matched case-insensitively after whitespace
# normalization; these spellings are the canonical render forms.
ACTION_NAMES: tuple[str, ...] = (
    "eating meal/snack",
    "writing on notebook/tablet",
    "typing on a laptop",
    "playing with mobile phone",
    "looking to the side/back",
    "looking down w/o reading/writing",
    "looking at laptop screen (not typing)",
    "raising hand",
    "rubbing face",
    "reading",
    "drinking",
    "yawning",
    "listening",
)

DEFAULT_FPS = 15.0
DEFAULT_WINDOW_SECONDS = 120.0


class EngagementLabel(str, Enum):
    ENGAGED = "engaged"
    DISENGAGED = "disengaged"


def normalize_name(name: str) -> str:
    """Lowercase and collapse runs of whitespace; the name-matching key."""
    return re.sub(r"\s+", " ", name.strip().lower())


def format_timestamp(frame: int, fps: float) -> str:
    """Render a frame index as mm:ss (floor of frame / fps)."""
    total = int(frame // fps)
    return f"{total // 60:02d}:{total % 60:02d}"


@dataclass(frozen=True)
class ActionLabel:
    id: int
    name: str

    def __post_init__(self):
        if self.id < 0:
            raise DataError(f"label id must be non-negative, got {self.id}")
        if not self.name.strip():
            raise DataError("label name must be non-empty")


@dataclass(frozen=True)
class ActionDictionary:
    """Closed action vocabulary, optionally with a label-merge partition.

    ``merge_groups`` maps every label id to a representative label id
    (identity for unmerged labels). It is total whenever present.
    """

    labels: tuple[ActionLabel, ...]
    merge_groups: Mapping[int, int] | None = None

    def __post_init__(self):
        if not self.labels:
            raise DataError("dictionary must contain at least one label")
        ids = [lab.id for lab in self.labels]
        if len(set(ids)) != len(ids):
            raise DataError("duplicate label ids in dictionary")
        names = [normalize_name(lab.name) for lab in self.labels]
        if len(set(names)) != len(names):
            raise DataError("duplicate label names in dictionary")
        if self.merge_groups is not None:
            groups = dict(self.merge_groups)
            if set(groups) != set(ids):
                raise DataError("merge_groups must be total over label ids")
            if not set(groups.values()) <= set(ids):
                raise DataError("merge_groups targets unknown label ids")
            object.__setattr__(self, "merge_groups", groups)
        object.__setattr__(self, "labels", tuple(self.labels))

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(lab.id for lab in self.labels)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(lab.name for lab in self.labels)

    def label_by_id(self, label_id: int) -> ActionLabel:
        for lab in self.labels:
            if lab.id == label_id:
                return lab
        raise DictionaryMismatchError(f"unknown label id {label_id}")

    def label_by_name(self, name: str) -> ActionLabel:
        key = normalize_name(name)
        for lab in self.labels:
            if normalize_name(lab.name) == key:
                return lab
        raise DictionaryMismatchError(f"unknown action name {name!r}")

    def require_id(self, label_id: int) -> int:
        self.label_by_id(label_id)
        return label_id

    def with_merged(self, *groups: Iterable[str]) -> "ActionDictionary":
        """Return a copy whose merge_groups folds each named group into its
        first member (identity elsewhere)."""
        mapping = {lab.id: lab.id for lab in self.labels}
        for group in groups:
            members = [self.label_by_name(n).id for n in group]
            if len(members) < 2:
                raise DataError("a merge group needs at least two labels")
            rep = members[0]
            for m in members[1:]:
                mapping[m] = rep
        return ActionDictionary(self.labels, mapping)


def default_dictionary() -> ActionDictionary:
    """The canonical 13-action classroom vocabulary, ids 0..12."""
    return ActionDictionary(
        tuple(ActionLabel(i, name) for i, name in enumerate(ACTION_NAMES))
    )


@dataclass(frozen=True)
class TimeSpan:
    """Half-open frame interval [start_frame, end_frame) at a given fps."""

    start_frame: int
    end_frame: int
    fps: float

    def __post_init__(self):
        if self.start_frame < 0:
            raise DataError(f"start_frame must be non-negative, got {self.start_frame}")
        if self.end_frame <= self.start_frame:
            raise DataError(
                f"span must be non-empty, got [{self.start_frame}, {self.end_frame})"
            )
        if not self.fps > 0:
            raise DataError(f"fps must be positive, got {self.fps}")

    @property
    def n_frames(self) -> int:
        return self.end_frame - self.start_frame

    @property
    def duration_seconds(self) -> float:
        return self.n_frames / self.fps

    def render(self) -> str:
        """mm:ss-mm:ss form of the span boundaries."""
        return (
            f"{format_timestamp(self.start_frame, self.fps)}"
            f"-{format_timestamp(self.end_frame, self.fps)}"
        )


@dataclass(frozen=True)
class FrameLabelStream:
    """Per-frame action labels for one student over one window."""

    labels: tuple[int, ...]
    fps: float
    student_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        if not self.labels:
            raise DataError("frame label stream must be non-empty")
        if not self.fps > 0:
            raise DataError(f"fps must be positive, got {self.fps}")

    @property
    def n_frames(self) -> int:
        return len(self.labels)

    def validate_dictionary(self, dictionary: ActionDictionary) -> None:
        known = set(dictionary.ids)
        for i, lab in enumerate(self.labels):
            if lab not in known:
                raise DictionaryMismatchError(
                    f"frame {i} of {self.student_id!r} carries unknown label {lab}"
                )


@dataclass(frozen=True)
class ActionSegment:
    label: int
    span: TimeSpan


def _validate_segments(segments: Sequence[ActionSegment], *, fused: bool) -> None:
    if not segments:
        raise ContiguityError("segment list must be non-empty")
    fps = segments[0].span.fps
    if segments[0].span.start_frame != 0:
        raise ContiguityError(
            f"first segment must start at frame 0, got {segments[0].span.start_frame}"
        )
    for prev, cur in zip(segments, segments[1:]):
        if cur.span.fps != fps:
            raise ContiguityError("segments mix different fps values")
        if cur.span.start_frame != prev.span.end_frame:
            raise ContiguityError(
                f"segments not contiguous at frame {prev.span.end_frame} "
                f"(next starts at {cur.span.start_frame})"
            )
        if fused and cur.label == prev.label:
            raise ContiguityError(
                f"adjacent segments share label {cur.label}; sequence is not fused"
            )


def fuse_segments(segments: Sequence[ActionSegment]) -> tuple[ActionSegment, ...]:
    """Merge runs of adjacent equal-label segments into single segments."""
    _validate_segments(segments, fused=False)
    fused: list[ActionSegment] = []
    for seg in segments:
        if fused and fused[-1].label == seg.label:
            last = fused[-1]
            fused[-1] = ActionSegment(
                seg.label,
                TimeSpan(last.span.start_frame, seg.span.end_frame, seg.span.fps),
            )
        else:
            fused.append(seg)
    return tuple(fused)


@dataclass(frozen=True)
class ActionSequence:
    """Ordered, contiguous, fully merged action segments over one window."""

    segments: tuple[ActionSegment, ...]
    student_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        _validate_segments(self.segments, fused=True)

    @classmethod
    def fuse(
        cls, segments: Sequence[ActionSegment], student_id: str = ""
    ) -> "ActionSequence":
        return cls(fuse_segments(segments), student_id)

    @classmethod
    def from_frames(cls, stream: FrameLabelStream) -> "ActionSequence":
        segments: list[ActionSegment] = []
        start = 0
        labels = stream.labels
        for i in range(1, len(labels) + 1):
            if i == len(labels) or labels[i] != labels[start]:
                segments.append(
                    ActionSegment(labels[start], TimeSpan(start, i, stream.fps))
                )
                start = i
        return cls(tuple(segments), stream.student_id)

    def to_frames(self) -> FrameLabelStream:
        labels: list[int] = []
        for seg in self.segments:
            labels.extend([seg.label] * seg.span.n_frames)
        return FrameLabelStream(tuple(labels), self.fps, self.student_id)

    @property
    def fps(self) -> float:
        return self.segments[0].span.fps

    @property
    def n_frames(self) -> int:
        return self.segments[-1].span.end_frame

    @property
    def label_order(self) -> tuple[int, ...]:
        """Segment labels in temporal order (the edit-distance view)."""
        return tuple(seg.label for seg in self.segments)


def apply_merge(seq: ActionSequence, dictionary: ActionDictionary) -> ActionSequence:
    """Remap labels through the dictionary's merge partition and re-fuse.

    Duration coverage is preserved; segment count never increases.
    """
    if dictionary.merge_groups is None:
        raise DataError("dictionary has no merge_groups to apply")
    groups = dictionary.merge_groups
    remapped = []
    for seg in seq.segments:
        if seg.label not in groups:
            raise DictionaryMismatchError(
                f"label {seg.label} not covered by merge_groups"
            )
        remapped.append(ActionSegment(groups[seg.label], seg.span))
    return ActionSequence.fuse(remapped, seq.student_id)


TimelineLike = Union[ActionSequence, FrameLabelStream]


def timeline_frames(timeline: TimelineLike) -> tuple[int, ...]:
    if isinstance(timeline, ActionSequence):
        return timeline.to_frames().labels
    return timeline.labels


def timeline_sequence(timeline: TimelineLike) -> ActionSequence:
    if isinstance(timeline, ActionSequence):
        return timeline
    return ActionSequence.from_frames(timeline)


@dataclass(frozen=True)
class ClassroomWindow:
    """One observation window: a target student plus their peers.

    ``truncated`` flags windows shorter than the configured length (the tail
    of a lecture); they are processed normally but marked.
    """

    window_id: str
    target: TimelineLike
    peers: tuple[TimelineLike, ...] = ()
    engagement_gt: EngagementLabel | None = None
    truncated: bool = False

    def __post_init__(self):
        object.__setattr__(self, "peers", tuple(self.peers))
        fps = self.target.fps
        n = _timeline_len(self.target)
        target_id = _timeline_student(self.target)
        for peer in self.peers:
            if peer.fps != fps:
                raise DataError(f"window {self.window_id}: members mix fps values")
            if _timeline_len(peer) != n:
                raise DataError(
                    f"window {self.window_id}: members have unequal lengths"
                )
            if _timeline_student(peer) == target_id:
                raise DataError(
                    f"window {self.window_id}: target {target_id!r} listed as peer"
                )

    @property
    def fps(self) -> float:
        return self.target.fps

    @property
    def n_frames(self) -> int:
        return _timeline_len(self.target)


def _timeline_len(timeline: TimelineLike) -> int:
    return timeline.n_frames


def _timeline_student(timeline: TimelineLike) -> str:
    return timeline.student_id
