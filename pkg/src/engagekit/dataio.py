"""Session files, sequence-text parsing, embedding-batch files, and the
synthetic classroom generator.

A session file is self-describing canonical JSON (UTF-8, LF, two-space
indent, sorted keys) carrying its own dictionary, per-student dense segments
in frames, and per-window engagement labels. The canonical form is
byte-stable so fixtures diff cleanly.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import (
    ActionDictionary,
    ActionLabel,
    ActionSegment,
    ActionSequence,
    ClassroomWindow,
    EngagementLabel,
    TimeSpan,
    default_dictionary,
)
from .errors import (
    ContiguityError,
    DataError,
    DictionaryMismatchError,
    SchemaError,
    SequenceTextError,
)
from .fewshot import EmbeddingBatch

SCHEMA_VERSION = 1

Segment3 = tuple[int, int, int]  # (label_id, start_frame, end_frame)


def canonical_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_jsonl(path: Path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n")


@dataclass(frozen=True)
class SessionWindow:
    window_id: str
    start_frame: int
    engagement: Mapping[str, EngagementLabel | None] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "engagement", dict(self.engagement))


@dataclass(frozen=True)
class SessionData:
    """In-memory model of one recorded session."""

    fps: float
    window_seconds: float
    dictionary: ActionDictionary
    students: Mapping[str, tuple[Segment3, ...]]
    windows: tuple[SessionWindow, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "students", {sid: tuple(segs) for sid, segs in sorted(self.students.items())}
        )
        object.__setattr__(self, "windows", tuple(self.windows))
        self._validate()

    def _validate(self) -> None:
        if not self.fps > 0:
            raise SchemaError(f"fps must be positive, got {self.fps}")
        if not self.window_seconds > 0:
            raise SchemaError(f"window_seconds must be positive, got {self.window_seconds}")
        if not self.students:
            raise SchemaError("session has no students")
        known = set(self.dictionary.ids)
        extents = set()
        for sid, segs in self.students.items():
            if not segs:
                raise SchemaError(f"student {sid!r} has no segments")
            cursor = 0
            for label, start, end in segs:
                if label not in known:
                    raise DictionaryMismatchError(
                        f"student {sid!r}: unknown label {label} at frame {start}"
                    )
                if start != cursor:
                    raise ContiguityError(
                        f"student {sid!r}: segment starting at frame {start} "
                        f"is not contiguous (expected {cursor})"
                    )
                if end <= start:
                    raise ContiguityError(
                        f"student {sid!r}: empty segment at frame {start}"
                    )
                cursor = end
            extents.add(cursor)
        if len(extents) != 1:
            raise SchemaError(f"students disagree on session length: {sorted(extents)}")
        n_frames = extents.pop()
        seen_ids = set()
        for win in self.windows:
            if win.window_id in seen_ids:
                raise SchemaError(f"duplicate window id {win.window_id!r}")
            seen_ids.add(win.window_id)
            if not 0 <= win.start_frame < n_frames:
                raise SchemaError(
                    f"window {win.window_id!r} starts at frame {win.start_frame}, "
                    f"outside the session (0..{n_frames - 1})"
                )
            for sid in win.engagement:
                if sid not in self.students:
                    raise SchemaError(
                        f"window {win.window_id!r} labels unknown student {sid!r}"
                    )

    @property
    def n_frames(self) -> int:
        segs = next(iter(self.students.values()))
        return segs[-1][2]

    @property
    def window_frames(self) -> int:
        return round(self.window_seconds * self.fps)


def save_session(session: SessionData, path: Path | str) -> None:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "fps": session.fps,
        "window_seconds": session.window_seconds,
        "dictionary": {
            "labels": [
                {"id": lab.id, "name": lab.name} for lab in session.dictionary.labels
            ],
            "merge_groups": (
                None
                if session.dictionary.merge_groups is None
                else {str(k): v for k, v in session.dictionary.merge_groups.items()}
            ),
        },
        "students": [
            {"student_id": sid, "segments": [list(seg) for seg in segs]}
            for sid, segs in session.students.items()
        ],
        "windows": [
            {
                "window_id": w.window_id,
                "start_frame": w.start_frame,
                "engagement": {
                    sid: (lab.value if lab is not None else None)
                    for sid, lab in sorted(w.engagement.items())
                },
            }
            for w in session.windows
        ],
    }
    Path(path).write_text(canonical_json(doc), encoding="utf-8")


def read_json_file(path: Path | str):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise SchemaError(f"{path}: cannot read: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON: {exc}") from exc


def load_session(path: Path | str) -> SessionData:
    doc = read_json_file(path)
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: top level must be an object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"{path}: unsupported schema_version {version!r}")
    try:
        labels = tuple(
            ActionLabel(int(lab["id"]), str(lab["name"]))
            for lab in doc["dictionary"]["labels"]
        )
        raw_groups = doc["dictionary"].get("merge_groups")
        groups = (
            None
            if raw_groups is None
            else {int(k): int(v) for k, v in raw_groups.items()}
        )
        dictionary = ActionDictionary(labels, groups)
        students = {
            str(st["student_id"]): tuple(
                (int(s[0]), int(s[1]), int(s[2])) for s in st["segments"]
            )
            for st in doc["students"]
        }
        windows = tuple(
            SessionWindow(
                window_id=str(w["window_id"]),
                start_frame=int(w["start_frame"]),
                engagement={
                    str(sid): (None if lab is None else EngagementLabel(lab))
                    for sid, lab in w.get("engagement", {}).items()
                },
            )
            for w in doc["windows"]
        )
        return SessionData(
            fps=float(doc["fps"]),
            window_seconds=float(doc["window_seconds"]),
            dictionary=dictionary,
            students=students,
            windows=windows,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: malformed session file: {exc}") from exc


def slice_window(
    segments: Sequence[Segment3],
    start_frame: int,
    end_frame: int,
    fps: float,
    student_id: str,
) -> ActionSequence:
    """Clip session-long segments to a window and rebase to frame 0."""
    clipped = []
    for label, s, e in segments:
        lo, hi = max(s, start_frame), min(e, end_frame)
        if lo < hi:
            clipped.append(
                ActionSegment(label, TimeSpan(lo - start_frame, hi - start_frame, fps))
            )
    if not clipped:
        raise DataError(
            f"student {student_id!r} has no frames in window [{start_frame}, {end_frame})"
        )
    return ActionSequence.fuse(clipped, student_id)


def classroom_windows(session: SessionData) -> list[ClassroomWindow]:
    """Expand a session into one ClassroomWindow per (window, target student)."""
    out = []
    for win in session.windows:
        ws = win.start_frame
        we = min(ws + session.window_frames, session.n_frames)
        truncated = (we - ws) < session.window_frames
        sequences = {
            sid: slice_window(segs, ws, we, session.fps, sid)
            for sid, segs in session.students.items()
        }
        for sid in sequences:
            out.append(
                ClassroomWindow(
                    window_id=f"{win.window_id}:{sid}",
                    target=sequences[sid],
                    peers=tuple(seq for other, seq in sequences.items() if other != sid),
                    engagement_gt=win.engagement.get(sid),
                    truncated=truncated,
                )
            )
    return out


_ENTRY_RE = re.compile(
    r"^(?P<name>.+?) \((?P<m1>\d{2}):(?P<s1>\d{2})-(?P<m2>\d{2}):(?P<s2>\d{2})\)$"
)


def parse_sequence_text(text: str, dictionary: ActionDictionary, fps: float) -> ActionSequence:
    """Parse ``name (mm:ss-mm:ss); ...`` back into an action sequence.

    Inverse of the sequence renderer at second resolution. Accepts an
    optional surrounding ``{ ... }``.
    """
    body = text.strip()
    if body.startswith("{") and body.endswith("}"):
        body = body[1:-1].strip()
    if not body:
        raise SequenceTextError("empty sequence text")
    segments = []
    cursor = None
    for chunk in body.split(";"):
        entry = chunk.strip()
        if not entry:
            raise SequenceTextError(f"empty entry in sequence text: {text!r}")
        match = _ENTRY_RE.match(entry)
        if match is None:
            raise SequenceTextError(f"malformed entry {entry!r} (expected 'name (mm:ss-mm:ss)')")
        try:
            label = dictionary.label_by_name(match["name"]).id
        except DictionaryMismatchError as exc:
            raise SequenceTextError(f"unknown action name {match['name']!r}") from exc
        start_s = int(match["m1"]) * 60 + int(match["s1"])
        end_s = int(match["m2"]) * 60 + int(match["s2"])
        if end_s <= start_s:
            raise SequenceTextError(f"entry {entry!r} does not move forward in time")
        if cursor is None:
            if start_s != 0:
                raise SequenceTextError(f"first entry must start at 00:00, got {entry!r}")
        elif start_s != cursor:
            raise SequenceTextError(
                f"entry {entry!r} is not contiguous with the previous end"
            )
        cursor = end_s
        segments.append(
            ActionSegment(label, TimeSpan(round(start_s * fps), round(end_s * fps), fps))
        )
    try:
        return ActionSequence.fuse(segments)
    except ContiguityError as exc:
        raise SequenceTextError(f"sequence text is not contiguous: {exc}") from exc


def save_embedding_batch(batch: EmbeddingBatch, path: Path | str) -> None:
    lines = ["# engagekit embedding batch"]
    lines.append(f"n {batch.n}")
    lines.append(f"c {batch.n_classes}")
    lines.append(f"d {batch.dim}")
    lines.append(f"temperature {batch.temperature!r}")
    lines.append("labels " + " ".join(str(int(y)) for y in batch.labels))
    for row in batch.video_embeddings:
        lines.append("video " + " ".join(repr(float(x)) for x in row))
    for row in batch.class_text_embeddings:
        lines.append("text " + " ".join(repr(float(x)) for x in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_embedding_batch(path: Path | str) -> EmbeddingBatch:
    header: dict[str, float] = {}
    labels: list[int] = []
    video: list[list[float]] = []
    text: list[list[float]] = []
    try:
        content = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemaError(f"{path}: cannot read: {exc}") from exc
    for lineno, raw in enumerate(content.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, _, rest = line.partition(" ")
        try:
            if key in ("n", "c", "d"):
                header[key] = int(rest)
            elif key == "temperature":
                header[key] = float(rest)
            elif key == "labels":
                labels = [int(tok) for tok in rest.split()]
            elif key == "video":
                video.append([float(tok) for tok in rest.split()])
            elif key == "text":
                text.append([float(tok) for tok in rest.split()])
            else:
                raise SchemaError(f"{path}:{lineno}: unknown record {key!r}")
        except ValueError as exc:
            raise SchemaError(f"{path}:{lineno}: {exc}") from exc
    for key in ("n", "c", "d", "temperature"):
        if key not in header:
            raise SchemaError(f"{path}: missing header field {key!r}")
    n, c, d = int(header["n"]), int(header["c"]), int(header["d"])
    if len(video) != n or len(text) != c or len(labels) != n:
        raise SchemaError(
            f"{path}: expected {n} video rows, {c} text rows, {n} labels; "
            f"got {len(video)}, {len(text)}, {len(labels)}"
        )
    if any(len(row) != d for row in video + text):
        raise SchemaError(f"{path}: embedding rows must have dimension {d}")
    try:
        return EmbeddingBatch(
            np.array(video), np.array(text), np.array(labels), header["temperature"]
        )
    except DataError as exc:
        raise SchemaError(f"{path}: {exc}") from exc


# --- synthetic classroom generation -------------------------------------------------


@dataclass(frozen=True)
class PhaseSpec:
    kind: str  # lecture | peer_discussion | independent_work
    seconds: int


@dataclass(frozen=True)
class InterruptionPattern:
    """Off-task bursts carved into each window: same total time whether it
    lands as one block or as several short checks."""

    label: str
    total_seconds: int
    bursts: int


@dataclass(frozen=True)
class PhaseBehavior:
    propensities: Mapping[str, float]  # action name -> probability
    switches_per_minute: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "propensities", dict(self.propensities))


@dataclass(frozen=True)
class BehaviorProfile:
    engagement: EngagementLabel
    phase_behaviors: Mapping[str, PhaseBehavior]
    interruptions: InterruptionPattern | None = None

    def __post_init__(self):
        object.__setattr__(self, "phase_behaviors", dict(self.phase_behaviors))


@dataclass(frozen=True)
class ScenarioSpec:
    seed: int
    profiles: Mapping[str, BehaviorProfile]
    phases: tuple[PhaseSpec, ...] = (PhaseSpec("lecture", 120),)
    fps: int = 15
    window_seconds: int = 120
    align_seconds: int = 1

    def __post_init__(self):
        object.__setattr__(self, "profiles", dict(self.profiles))
        object.__setattr__(self, "phases", tuple(self.phases))


def _validate_spec(spec: ScenarioSpec, dictionary: ActionDictionary) -> None:
    if not spec.profiles:
        raise DataError("scenario needs at least one student profile")
    if spec.align_seconds < 1:
        raise DataError("align_seconds must be >= 1")
    for phase in spec.phases:
        if phase.seconds <= 0:
            raise DataError(f"phase {phase.kind!r} must have positive duration")
    for sid, profile in spec.profiles.items():
        for phase in spec.phases:
            behavior = profile.phase_behaviors.get(phase.kind)
            if behavior is None:
                raise DataError(f"profile {sid!r} lacks behavior for phase {phase.kind!r}")
            weights = list(behavior.propensities.values())
            if not weights or any(w < 0 for w in weights) or abs(sum(weights) - 1.0) > 1e-9:
                raise DataError(
                    f"invalid propensities for {sid!r}/{phase.kind!r}: must be "
                    "non-negative and sum to 1"
                )
            for name in behavior.propensities:
                dictionary.label_by_name(name)
        pattern = profile.interruptions
        if pattern is not None:
            dictionary.label_by_name(pattern.label)
            if pattern.total_seconds <= 0 or pattern.bursts <= 0:
                raise DataError(f"profile {sid!r}: interruption pattern must be positive")


def _sample_label(rng: random.Random, items: list[tuple[int, float]], avoid: int | None) -> int:
    pool = [(lab, w) for lab, w in items if w > 0 and lab != avoid]
    if not pool:
        pool = [(lab, w) for lab, w in items if w > 0]
    labels, weights = zip(*pool)
    return rng.choices(labels, weights=weights)[0]


def _fill_phase(
    rng: random.Random,
    behavior: PhaseBehavior,
    items: list[tuple[int, float]],
    length: int,
    align: int,
) -> list[int]:
    if behavior.switches_per_minute <= 0 or len([w for _, w in items if w > 0]) == 1:
        return [_sample_label(rng, items, avoid=None)] * length
    mean_seconds = 60.0 / behavior.switches_per_minute
    out: list[int] = []
    prev: int | None = None
    while len(out) < length:
        duration = align * max(1, round(rng.expovariate(1.0 / mean_seconds) / align))
        duration = min(duration, length - len(out))
        label = _sample_label(rng, items, avoid=prev)
        out.extend([label] * duration)
        prev = label
    return out


def _burst_layout(window_seconds: int, pattern: InterruptionPattern) -> list[tuple[int, int]]:
    n = pattern.bursts
    base, rem = divmod(pattern.total_seconds, n)
    layout = []
    for i in range(n):
        duration = base + (1 if i < rem else 0)
        center = window_seconds * (i + 1) / (n + 1)
        start = int(center - duration / 2 + 0.5)
        start = max(0, min(start, window_seconds - duration))
        layout.append((start, start + duration))
    for (s1, e1), (s2, e2) in zip(layout, layout[1:]):
        if s2 < e1:
            raise DataError(
                f"interruption bursts overlap: {pattern.bursts} x ~{base}s "
                f"does not fit a {window_seconds}s window"
            )
    return layout


def generate_scenario(spec: ScenarioSpec) -> SessionData:
    """Deterministically synthesize a session from behavior profiles.

    Label streams are built at one-second resolution (segment boundaries on
    the ``align_seconds`` grid), then converted to frames. Interruption
    patterns are carved into every window at evenly spaced offsets.
    """
    dictionary = default_dictionary()
    _validate_spec(spec, dictionary)
    session_seconds = sum(p.seconds for p in spec.phases)
    students: dict[str, tuple[Segment3, ...]] = {}
    for sid in sorted(spec.profiles):
        profile = spec.profiles[sid]
        seconds: list[int] = []
        for pi, phase in enumerate(spec.phases):
            rng = random.Random(f"{spec.seed}/{sid}/{pi}")
            behavior = profile.phase_behaviors[phase.kind]
            items = sorted(
                (dictionary.label_by_name(name).id, weight)
                for name, weight in behavior.propensities.items()
            )
            seconds.extend(_fill_phase(rng, behavior, items, phase.seconds, spec.align_seconds))
        if profile.interruptions is not None:
            burst_label = dictionary.label_by_name(profile.interruptions.label).id
            for ws in range(0, session_seconds, spec.window_seconds):
                length = min(spec.window_seconds, session_seconds - ws)
                if length < spec.window_seconds:
                    continue  # do not carve patterns into truncated tails
                for s, e in _burst_layout(spec.window_seconds, profile.interruptions):
                    seconds[ws + s : ws + e] = [burst_label] * (e - s)
        students[sid] = _seconds_to_segments(seconds, spec.fps)

    windows = []
    index = 0
    for ws in range(0, session_seconds, spec.window_seconds):
        windows.append(
            SessionWindow(
                window_id=f"w{index:03d}",
                start_frame=ws * spec.fps,
                engagement={
                    sid: spec.profiles[sid].engagement for sid in sorted(spec.profiles)
                },
            )
        )
        index += 1
    return SessionData(
        fps=float(spec.fps),
        window_seconds=float(spec.window_seconds),
        dictionary=dictionary,
        students=students,
        windows=tuple(windows),
    )


def _seconds_to_segments(seconds: Sequence[int], fps: int) -> tuple[Segment3, ...]:
    segments: list[Segment3] = []
    start = 0
    for i in range(1, len(seconds) + 1):
        if i == len(seconds) or seconds[i] != seconds[start]:
            segments.append((seconds[start], start * fps, i * fps))
            start = i
    return tuple(segments)


# --- canned scenarios ----------------------------------------------------------------


def scenario_fig1(seed: int = 0, n_peers: int = 3, peers_typing: bool = False) -> ScenarioSpec:
    """One student typing through a lecture window.

    With listening peers the typist is the odd one out (disengaged); in the
    twin where peers also type, the same behavior reads as engaged.
    """
    target_label = EngagementLabel.ENGAGED if peers_typing else EngagementLabel.DISENGAGED
    peer_action = "typing on a laptop" if peers_typing else "listening"
    profiles = {
        "s00": BehaviorProfile(
            engagement=target_label,
            phase_behaviors={"lecture": PhaseBehavior({"typing on a laptop": 1.0})},
        )
    }
    for i in range(n_peers):
        profiles[f"s{i + 1:02d}"] = BehaviorProfile(
            engagement=EngagementLabel.ENGAGED,
            phase_behaviors={"lecture": PhaseBehavior({peer_action: 1.0})},
        )
    return ScenarioSpec(seed=seed, profiles=profiles)


def scenario_phone_checks(seed: int = 0) -> ScenarioSpec:
    """Two note-takers with identical phone-use totals: one 25 s block versus
    five 5 s checks. Only the ordering distinguishes them."""
    profiles = {
        "s00": BehaviorProfile(
            engagement=EngagementLabel.ENGAGED,
            phase_behaviors={"lecture": PhaseBehavior({"writing on notebook/tablet": 1.0})},
            interruptions=InterruptionPattern("playing with mobile phone", 25, 1),
        ),
        "s01": BehaviorProfile(
            engagement=EngagementLabel.DISENGAGED,
            phase_behaviors={"lecture": PhaseBehavior({"writing on notebook/tablet": 1.0})},
            interruptions=InterruptionPattern("playing with mobile phone", 25, 5),
        ),
        "s02": BehaviorProfile(
            engagement=EngagementLabel.ENGAGED,
            phase_behaviors={"lecture": PhaseBehavior({"listening": 1.0})},
        ),
        "s03": BehaviorProfile(
            engagement=EngagementLabel.ENGAGED,
            phase_behaviors={"lecture": PhaseBehavior({"listening": 1.0})},
        ),
    }
    return ScenarioSpec(seed=seed, profiles=profiles)


_ENGAGED_LISTENER = PhaseBehavior(
    {"listening": 0.6, "writing on notebook/tablet": 0.25, "reading": 0.15},
    switches_per_minute=1.5,
)
_ENGAGED_NOTETAKER = PhaseBehavior(
    {"writing on notebook/tablet": 0.5, "listening": 0.3, "typing on a laptop": 0.2},
    switches_per_minute=2.0,
)
_DISTRACTED = PhaseBehavior(
    {
        "looking to the side/back": 0.35,
        "playing with mobile phone": 0.3,
        "looking down w/o reading/writing": 0.2,
        "listening": 0.15,
    },
    switches_per_minute=3.0,
)


def scenario_lecture(
    seed: int,
    n_students: int = 6,
    n_windows: int = 2,
    align_seconds: int = 1,
    with_interruptions: bool = True,
) -> ScenarioSpec:
    """A plain lecture with a mix of engaged and distracted students."""
    profiles: dict[str, BehaviorProfile] = {}
    for i in range(n_students):
        kind = i % 4
        if kind == 3:
            profiles[f"s{i:02d}"] = BehaviorProfile(
                engagement=EngagementLabel.DISENGAGED,
                phase_behaviors={"lecture": _DISTRACTED},
                interruptions=(
                    InterruptionPattern("playing with mobile phone", 20, 4)
                    if with_interruptions
                    else None
                ),
            )
        else:
            behavior = _ENGAGED_NOTETAKER if kind == 1 else _ENGAGED_LISTENER
            profiles[f"s{i:02d}"] = BehaviorProfile(
                engagement=EngagementLabel.ENGAGED,
                phase_behaviors={"lecture": behavior},
            )
    return ScenarioSpec(
        seed=seed,
        profiles=profiles,
        phases=(PhaseSpec("lecture", 120 * n_windows),),
        align_seconds=align_seconds,
    )


SCENARIOS = {
    "lecture": lambda seed: scenario_lecture(seed),
    "fig1": lambda seed: scenario_fig1(seed),
    "fig1-peers-typing": lambda seed: scenario_fig1(seed, peers_typing=True),
    "phone-checks": lambda seed: scenario_phone_checks(seed),
}
