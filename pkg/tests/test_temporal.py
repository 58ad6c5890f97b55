import random

import pytest
from hypothesis import given, settings, strategies as st

from engagekit.core import (
    ActionSegment,
    ActionSequence,
    ClassroomWindow,
    FrameLabelStream,
    TimeSpan,
)
from engagekit.errors import ContextUnavailableError, ContiguityError, DataError, TransportError
from engagekit.temporal import (
    OracleRecognizer,
    RecognizerVerdict,
    SegmentClip,
    WindowingConfig,
    aggregate_context,
    clips_for_spans,
    merge_verdicts,
    recognize_segments,
    render_sequence_text,
    sample_frame_offsets,
    split_windows,
    to_histogram,
)

from conftest import make_random_sequence

FPS = 15.0


def stream_of(labels, student_id="s"):
    return FrameLabelStream(tuple(labels), FPS, student_id)


class TestSplitWindows:
    def test_default_grid_yields_24_spans(self):
        spans = split_windows(stream_of([0] * 1800), WindowingConfig())
        assert len(spans) == 24
        assert all(s.n_frames == 75 for s in spans)
        assert spans[0].start_frame == 0
        assert spans[-1].end_frame == 1800

    def test_whole_window_segment(self):
        spans = split_windows(stream_of([0] * 1800), WindowingConfig(segment_seconds=120))
        assert len(spans) == 1
        assert spans[0].n_frames == 1800

    def test_remainder_becomes_short_tail(self):
        spans = split_windows(stream_of([0] * (122 * 15)), WindowingConfig())
        assert len(spans) == 25
        assert all(s.n_frames == 75 for s in spans[:-1])
        assert spans[-1].n_frames == 30

    def test_spans_are_contiguous(self):
        spans = split_windows(stream_of([0] * 1000), WindowingConfig(segment_seconds=3))
        for a, b in zip(spans, spans[1:]):
            assert a.end_frame == b.start_frame


class TestRecognize:
    def test_oracle_echoes_per_span_mode(self):
        labels = [1] * 50 + [2] * 25 + [3] * 75
        stream = stream_of(labels)
        cfg = WindowingConfig(segment_seconds=5)
        spans = split_windows(stream, cfg)
        clips = clips_for_spans(stream, spans, None, cfg)
        verdicts = recognize_segments(clips, OracleRecognizer(), max_workers=1)
        assert [v.label for v in verdicts] == [1, 3]

    def test_oracle_breaks_ties_by_lowest_id(self):
        clip = SegmentClip("c", TimeSpan(0, 4, FPS), (7, 3, 3, 7), None)
        assert OracleRecognizer().recognize(clip).label == 3

    def test_uniform_scores_argmax_is_label_zero(self):
        scores = tuple(1 / 13 for _ in range(13))
        verdict = RecognizerVerdict(label=0, scores=scores)
        assert verdict.label == 0
        with pytest.raises(DataError):
            RecognizerVerdict(label=5, scores=scores)

    def test_verdict_count_matches_span_count(self):
        stream = stream_of([0] * 1800)
        cfg = WindowingConfig()
        spans = split_windows(stream, cfg)
        clips = clips_for_spans(stream, spans, None, cfg)
        verdicts = recognize_segments(clips, OracleRecognizer())
        assert len(verdicts) == 24

    def test_failures_abort_the_window(self):
        class Flaky:
            def recognize(self, clip):
                if clip.span.start_frame >= 150:
                    raise TransportError("stub down")
                return RecognizerVerdict(label=0)

        stream = stream_of([0] * 300)
        cfg = WindowingConfig(segment_seconds=5)
        spans = split_windows(stream, cfg)
        clips = clips_for_spans(stream, spans, None, cfg)
        with pytest.raises(TransportError, match="2 segment"):
            recognize_segments(clips, Flaky(), max_workers=2)

    def test_sample_offsets_repeat_when_short(self):
        offsets = sample_frame_offsets(4, 8)
        assert len(offsets) == 8
        assert offsets == [0, 0, 1, 1, 2, 2, 3, 3]
        assert sample_frame_offsets(75, 32)[0] == 0
        assert max(sample_frame_offsets(75, 32)) < 75


class TestMergeVerdicts:
    def spans(self, n, frames_each):
        return [TimeSpan(i * frames_each, (i + 1) * frames_each, FPS) for i in range(n)]

    def test_fuses_consecutive_identical_predictions(self):
        spans = self.spans(4, 450)  # 30 s spans
        verdicts = [RecognizerVerdict(x) for x in (1, 1, 2, 1)]
        merged = merge_verdicts(spans, verdicts, "s")
        assert [(s.label, s.span.start_frame, s.span.end_frame) for s in merged.segments] == [
            (1, 0, 900),
            (2, 900, 1350),
            (1, 1350, 1800),
        ]

    def test_all_identical_collapse_to_one_segment(self):
        merged = merge_verdicts(self.spans(24, 75), [RecognizerVerdict(4)] * 24)
        assert len(merged.segments) == 1
        assert merged.segments[0].span.n_frames == 1800

    def test_alternating_labels_stay_apart(self):
        merged = merge_verdicts(self.spans(4, 75), [RecognizerVerdict(x) for x in (1, 2, 1, 2)])
        assert len(merged.segments) == 4

    def test_non_contiguous_spans_rejected(self):
        spans = [TimeSpan(0, 75, FPS), TimeSpan(80, 150, FPS)]
        with pytest.raises(ContiguityError):
            merge_verdicts(spans, [RecognizerVerdict(1), RecognizerVerdict(2)])

    def test_length_mismatch_rejected(self):
        with pytest.raises(DataError):
            merge_verdicts(self.spans(3, 75), [RecognizerVerdict(1)])


def full_window_stream(label, student_id):
    return stream_of([label] * 1800, student_id)


class TestAggregateContext:
    def test_unanimous_peers(self):
        window = ClassroomWindow(
            "w",
            full_window_stream(2, "t"),
            (full_window_stream(12, "p1"), full_window_stream(12, "p2")),
        )
        timeline = aggregate_context(window, bin_seconds=5)
        assert len(timeline.segments) == 1
        assert timeline.segments[0].label == 12
        assert timeline.n_frames == 1800

    def test_strict_majority_wins(self):
        window = ClassroomWindow(
            "w",
            full_window_stream(12, "t"),
            (
                full_window_stream(1, "p1"),
                full_window_stream(1, "p2"),
                full_window_stream(3, "p3"),
            ),
        )
        timeline = aggregate_context(window, bin_seconds=5)
        assert all(seg.label == 1 for seg in timeline.segments)

    def test_ties_break_to_lowest_label_id(self):
        # typing (id 2) vs reading (id 9) split evenly: lowest id wins
        window = ClassroomWindow(
            "w",
            full_window_stream(12, "t"),
            (full_window_stream(9, "p1"), full_window_stream(2, "p2")),
        )
        timeline = aggregate_context(window, bin_seconds=5)
        assert all(seg.label == 2 for seg in timeline.segments)

    def test_zero_peers_is_an_error(self):
        window = ClassroomWindow("w", full_window_stream(1, "t"), ())
        with pytest.raises(ContextUnavailableError):
            aggregate_context(window)

    def test_permutation_and_duplication_invariance(self):
        rng = random.Random(23)
        peers = tuple(
            make_random_sequence(rng, n_frames=600, student_id=f"p{i}") for i in range(4)
        )
        target = make_random_sequence(rng, n_frames=600, student_id="t")
        base = aggregate_context(ClassroomWindow("w", target, peers), 5)
        shuffled = tuple(reversed(peers))
        assert aggregate_context(ClassroomWindow("w", target, shuffled), 5) == base
        # duplicating the full peer set cannot change any bin's majority
        dup_peers = tuple(
            FrameLabelStream(p.to_frames().labels, FPS, f"d{i}")
            for i, p in enumerate(peers)
        )
        assert aggregate_context(ClassroomWindow("w", target, peers + dup_peers), 5) == base

    def test_bins_fused(self):
        half = [1] * 900 + [2] * 900
        window = ClassroomWindow("w", full_window_stream(12, "t"), (stream_of(half, "p"),))
        timeline = aggregate_context(window, bin_seconds=5)
        assert [seg.label for seg in timeline.segments] == [1, 2]


class TestHistogram:
    def seq(self, *parts):
        return ActionSequence(
            tuple(ActionSegment(lab, TimeSpan(s, e, FPS)) for lab, s, e in parts)
        )

    def test_two_equal_halves(self):
        h = to_histogram(self.seq((1, 0, 900), (2, 900, 1800)))
        assert h.seconds_per_label == {1: 60.0, 2: 60.0}
        assert h.total_seconds == 120.0

    def test_single_segment(self):
        h = to_histogram(self.seq((12, 0, 1800)))
        assert h.seconds_per_label == {12: 120.0}

    def test_repeated_label_accumulates(self):
        h = to_histogram(self.seq((1, 0, 300), (2, 300, 450), (1, 450, 1800)))
        assert h.seconds_per_label[1] == pytest.approx(110.0)
        assert h.seconds_per_label[2] == pytest.approx(10.0)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(min_value=0, max_value=10**9))
    def test_histogram_unchanged_by_fusing(self, seed):
        rng = random.Random(seed)
        n = rng.randint(1, 12)
        bounds = sorted(rng.sample(range(1, 600), n - 1)) if n > 1 else []
        bounds = [0] + bounds + [600]
        raw = [
            ActionSegment(rng.randrange(3), TimeSpan(bounds[i], bounds[i + 1], FPS))
            for i in range(n)
        ]
        direct: dict[int, float] = {}
        for seg in raw:
            direct[seg.label] = direct.get(seg.label, 0.0) + seg.span.duration_seconds
        fused = to_histogram(ActionSequence.fuse(raw))
        assert fused.seconds_per_label == pytest.approx(direct)


class TestRenderSequenceText:
    def test_canonical_example(self, dictionary):
        seq = ActionSequence(
            (
                ActionSegment(1, TimeSpan(0, 300, FPS)),
                ActionSegment(12, TimeSpan(300, 975, FPS)),
            )
        )
        assert (
            render_sequence_text(seq, dictionary)
            == "writing on notebook/tablet (00:00-00:20); listening (00:20-01:05)"
        )

    def test_full_window_single_action(self, dictionary):
        seq = ActionSequence((ActionSegment(12, TimeSpan(0, 1800, FPS)),))
        assert render_sequence_text(seq, dictionary) == "listening (00:00-02:00)"

    def test_distinct_sequences_render_distinctly(self, dictionary):
        rng = random.Random(99)
        seen = {}
        for _ in range(200):
            seq = make_random_sequence(rng, n_frames=120, max_segments=4, n_labels=5)
            text = render_sequence_text(seq, dictionary)
            # same text implies same second-resolution boundaries and labels
            key = tuple(
                (s.label, int(s.span.start_frame // FPS), int(s.span.end_frame // FPS))
                for s in seq.segments
            )
            if text in seen:
                assert seen[text] == key
            seen[text] = key


def test_split_recognize_merge_reproduces_aligned_ground_truth():
    rng = random.Random(5)
    cfg = WindowingConfig(segment_seconds=5)
    for _ in range(25):
        k = rng.randint(1, 8)
        cuts = sorted(rng.sample(range(1, 24), k - 1)) if k > 1 else []
        bounds = [b * 75 for b in [0] + cuts + [24]]
        labels = []
        for _ in range(k):
            lab = rng.randrange(13)
            while labels and lab == labels[-1]:
                lab = rng.randrange(13)
            labels.append(lab)
        gt = ActionSequence(
            tuple(
                ActionSegment(labels[i], TimeSpan(bounds[i], bounds[i + 1], FPS))
                for i in range(k)
            ),
            "s",
        )
        stream = gt.to_frames()
        spans = split_windows(stream, cfg)
        clips = clips_for_spans(stream, spans, None, cfg)
        verdicts = recognize_segments(clips, OracleRecognizer(), max_workers=1)
        assert merge_verdicts(spans, verdicts, "s") == gt
