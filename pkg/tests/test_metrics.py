import random

import pytest
from hypothesis import given, settings, strategies as st
from sklearn.metrics import precision_recall_fscore_support

from engagekit.core import ActionSegment, ActionSequence, FrameLabelStream, TimeSpan
from engagekit.errors import ConfigError, DataError
from engagekit.metrics import (
    classification_report,
    edit_score,
    f1_at_tau,
    f1_counts,
    f1_from_counts,
    mof,
    seg_report,
)

from conftest import make_random_sequence
from oracles import oracle_edit_score, oracle_f1_score, oracle_mof

FPS = 15.0


def seq(*parts, fps=FPS):
    """parts: (label, start_frame, end_frame)"""
    return ActionSequence(
        tuple(ActionSegment(lab, TimeSpan(s, e, fps)) for lab, s, e in parts)
    )


class TestMof:
    def test_identical_streams_score_100(self):
        frames = [1, 2, 3] * 40
        assert mof(frames, frames) == 100.0

    def test_ratio_arithmetic(self):
        gt = [0] * 120
        pred = [0] * 90 + [1] * 30
        assert mof(pred, gt) == 75.0

    def test_disjoint_labels_score_zero(self):
        assert mof([1] * 50, [2] * 50) == 0.0

    def test_length_mismatch_rejected(self):
        with pytest.raises(DataError):
            mof([1, 2], [1, 2, 3])


class TestEditScore:
    def test_identical_orders_score_100(self):
        a = seq((1, 0, 100), (2, 100, 300))
        b = seq((1, 0, 150), (2, 150, 300))
        assert edit_score(a, b) == 100.0

    def test_one_deletion_of_three(self):
        pred = seq((1, 0, 100), (2, 100, 200))
        gt = seq((1, 0, 80), (2, 80, 160), (1, 160, 200))
        assert edit_score(pred, gt) == pytest.approx(100 * (1 - 1 / 3))

    def test_disjoint_same_length_scores_zero(self):
        pred = seq((1, 0, 100), (2, 100, 200), (3, 200, 300))
        gt = seq((4, 0, 100), (5, 100, 200), (6, 200, 300))
        assert edit_score(pred, gt) == 0.0

    def test_invariant_to_uniform_time_rescaling(self):
        rng = random.Random(11)
        for _ in range(20):
            a = make_random_sequence(rng, n_frames=600)
            b = make_random_sequence(rng, n_frames=600)
            stretch = lambda s: ActionSequence(
                tuple(
                    ActionSegment(
                        x.label,
                        TimeSpan(3 * x.span.start_frame, 3 * x.span.end_frame, x.span.fps),
                    )
                    for x in s.segments
                ),
                s.student_id,
            )
            assert edit_score(a, b) == edit_score(stretch(a), stretch(b))


class TestF1AtTau:
    def test_identical_sequences_score_100(self):
        a = seq((1, 0, 900), (2, 900, 1800))
        for tau in (10, 25, 50):
            assert f1_at_tau(a, a, tau) == 100.0

    def test_half_overlap_prediction_at_tau_25(self):
        gt = seq((1, 0, 100))
        pred = seq((1, 0, 50), (2, 50, 100))
        assert f1_at_tau(pred, gt, 25) == pytest.approx(100 * 2 / 3)

    def test_boundary_iou_is_fp_under_strict_rule(self):
        gt = seq((1, 0, 100))
        pred = seq((1, 0, 50), (2, 50, 100))
        assert f1_counts(pred, gt, 50) == (0, 2, 1)
        assert f1_counts(pred, gt, 50, inclusive=True) == (1, 1, 0)

    def test_multiple_overlaps_yield_one_tp(self):
        gt = seq((1, 0, 100))
        pred = seq((1, 0, 40), (2, 40, 60), (1, 60, 100))
        # both label-1 predictions overlap the single ground-truth segment with
        # IoU 0.4 > 0.25; only the first claims it, the rest are FPs
        assert f1_counts(pred, gt, 25) == (1, 2, 0)

    def test_nonstandard_tau_requires_override(self):
        a = seq((1, 0, 100))
        with pytest.raises(ConfigError):
            f1_at_tau(a, a, 30)
        assert f1_at_tau(a, a, 30, restrict_taus=False) == 100.0

    def test_empty_counts_define_vacuous_100(self):
        assert f1_from_counts(0, 0, 0) == 100.0


@settings(max_examples=200, deadline=None)
@given(st.integers(min_value=0, max_value=10**9))
def test_metrics_match_oracles(seed):
    rng = random.Random(seed)
    pred = make_random_sequence(rng, n_frames=600, max_segments=10)
    gt = make_random_sequence(rng, n_frames=600, max_segments=10)
    assert edit_score(pred, gt) == oracle_edit_score(pred, gt)
    assert mof(pred.to_frames().labels, gt.to_frames().labels) == oracle_mof(
        pred.to_frames().labels, gt.to_frames().labels
    )
    for tau in (10, 25, 50):
        assert f1_at_tau(pred, gt, tau) == oracle_f1_score(pred, gt, tau)


@settings(max_examples=200, deadline=None)
@given(st.integers(min_value=0, max_value=10**9))
def test_f1_is_non_increasing_in_tau(seed):
    rng = random.Random(seed)
    pred = make_random_sequence(rng, n_frames=450, max_segments=10)
    gt = make_random_sequence(rng, n_frames=450, max_segments=10)
    scores = [f1_at_tau(pred, gt, tau) for tau in (10, 25, 50)]
    assert scores[0] >= scores[1] >= scores[2]


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=0, max_value=10**9))
def test_metrics_symmetric_under_relabeling(seed):
    rng = random.Random(seed)
    pred = make_random_sequence(rng, n_frames=300, max_segments=8)
    gt = make_random_sequence(rng, n_frames=300, max_segments=8)
    perm = list(range(13))
    rng.shuffle(perm)
    relabel = lambda s: ActionSequence(
        tuple(ActionSegment(perm[x.label], x.span) for x in s.segments), s.student_id
    )
    before = seg_report(pred, gt)
    after = seg_report(relabel(pred), relabel(gt))
    assert before == after


def test_high_mof_fragmented_prediction_scores_low_on_segments():
    n = 1800
    gt_frames = [5] * n
    pred_frames = list(gt_frames)
    for i in range(40, n, 40):
        pred_frames[i] = 7
    gt = ActionSequence.from_frames(FrameLabelStream(tuple(gt_frames), FPS))
    pred = ActionSequence.from_frames(FrameLabelStream(tuple(pred_frames), FPS))
    assert mof(pred_frames, gt_frames) > 95.0
    assert len(pred.segments) >= 20
    assert f1_at_tau(pred, gt, 50) <= 20.0
    assert edit_score(pred, gt) <= 30.0


class TestClassificationReport:
    def test_all_correct_is_ones(self):
        labels = ["engaged"] * 3 + ["disengaged"] * 2
        report = classification_report(labels, labels)
        for m in report.per_class.values():
            assert (m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0)
        assert (report.weighted.precision, report.weighted.recall, report.weighted.f1) == (
            1.0,
            1.0,
            1.0,
        )

    def test_all_engaged_predictions_on_balanced_truth(self):
        preds = ["engaged"] * 8
        gts = ["engaged"] * 4 + ["disengaged"] * 4
        report = classification_report(preds, gts)
        engaged = report.per_class["engaged"]
        disengaged = report.per_class["disengaged"]
        assert engaged.precision == 0.5
        assert engaged.recall == 1.0
        assert engaged.f1 == pytest.approx(2 / 3)
        assert (disengaged.precision, disengaged.recall, disengaged.f1) == (0.0, 0.0, 0.0)

    def test_single_class_truth_weighs_only_that_class(self):
        preds = ["engaged", "engaged", "disengaged"]
        gts = ["engaged"] * 3
        report = classification_report(preds, gts)
        assert report.weighted.recall == report.per_class["engaged"].recall
        assert report.weighted.precision == report.per_class["engaged"].precision

    def test_empty_input_rejected(self):
        with pytest.raises(DataError):
            classification_report([], [])

    @settings(max_examples=100, deadline=None)
    @given(st.integers(min_value=0, max_value=10**9))
    def test_matches_sklearn(self, seed):
        rng = random.Random(seed)
        n = rng.randint(1, 40)
        preds = [rng.choice(["engaged", "disengaged"]) for _ in range(n)]
        gts = [rng.choice(["engaged", "disengaged"]) for _ in range(n)]
        report = classification_report(preds, gts)
        for cls in ("engaged", "disengaged"):
            p, r, f, s = precision_recall_fscore_support(
                gts, preds, labels=[cls], zero_division=0, average=None
            )
            m = report.per_class[cls]
            assert m.precision == pytest.approx(p[0])
            assert m.recall == pytest.approx(r[0])
            assert m.f1 == pytest.approx(f[0])
            assert m.support == s[0]
        wp, wr, wf, _ = precision_recall_fscore_support(
            gts, preds, labels=["engaged", "disengaged"], zero_division=0, average="weighted"
        )
        assert report.weighted.precision == pytest.approx(wp)
        assert report.weighted.recall == pytest.approx(wr)
        assert report.weighted.f1 == pytest.approx(wf)
