import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fusionette import (
    MetricsReport,
    average_reports,
    confusion_matrix,
    report_from_labels,
)
from fusionette.errors import DataError

from metrics_oracle import brute_force_metrics


def test_worked_example():
    report = report_from_labels([0, 0, 1, 1], [0, 1, 1, 1], num_classes=2)
    assert report.accuracy == pytest.approx(0.75)
    assert report.per_class_f1[0] == pytest.approx(2 / 3)
    assert report.per_class_f1[1] == pytest.approx(0.8)
    assert report.macro_f1 == pytest.approx((2 / 3 + 0.8) / 2)
    assert report.weighted_f1 == pytest.approx((2 / 3 + 0.8) / 2)
    assert report.confusion == [[1, 1], [0, 2]]


def test_perfect_predictions():
    report = report_from_labels([0, 1, 2, 1], [0, 1, 2, 1], num_classes=3)
    assert report.accuracy == 1.0
    assert report.macro_f1 == 1.0
    assert report.weighted_f1 == 1.0


def test_absent_class_counts_as_zero_in_macro():
    # class 2 has no true samples and no predictions: F1 = 0 and macro includes it
    report = report_from_labels([0, 0, 1], [0, 0, 1], num_classes=3)
    assert report.per_class_f1 == [1.0, 1.0, 0.0]
    assert report.macro_f1 == pytest.approx(2 / 3)
    assert report.weighted_f1 == pytest.approx(1.0)


def test_identities_hold_on_random_reports():
    rng = np.random.default_rng(0)
    for c in (2, 3, 5):
        for _ in range(50):
            n = int(rng.integers(1, 40))
            labels = rng.integers(0, c, n)
            preds = rng.integers(0, c, n)
            rep = report_from_labels(labels, preds, c)
            conf = np.array(rep.confusion, dtype=np.float64)
            assert conf.sum() == rep.n_samples == n
            assert rep.accuracy == pytest.approx(np.trace(conf) / n, abs=1e-12)
            assert rep.macro_f1 == pytest.approx(np.mean(rep.per_class_f1), abs=1e-12)
            support = conf.sum(axis=1)
            assert rep.weighted_f1 == pytest.approx((support / n) @ rep.per_class_f1, abs=1e-12)
            assert 0.0 <= rep.macro_f1 <= 1.0 and 0.0 <= rep.weighted_f1 <= 1.0


def test_balanced_supports_make_macro_equal_weighted():
    rng = np.random.default_rng(1)
    labels = np.repeat([0, 1, 2], 30)
    preds = rng.integers(0, 3, 90)
    rep = report_from_labels(labels, preds, 3)
    assert rep.macro_f1 == pytest.approx(rep.weighted_f1, abs=1e-12)


def test_against_brute_force_oracle():
    rng = np.random.default_rng(2)
    for c in (2, 3, 5):
        for _ in range(100):
            n = int(rng.integers(1, 60))
            labels = rng.integers(0, c, n)
            preds = rng.integers(0, c, n)
            rep = report_from_labels(labels, preds, c)
            acc, macro, weighted = brute_force_metrics(labels, preds, c)
            assert rep.accuracy == pytest.approx(acc, abs=1e-12)
            assert rep.macro_f1 == pytest.approx(macro, abs=1e-12)
            assert rep.weighted_f1 == pytest.approx(weighted, abs=1e-12)


@given(
    st.integers(2, 5).flatmap(
        lambda c: st.tuples(
            st.just(c),
            st.lists(st.integers(0, c - 1), min_size=1, max_size=50),
            st.lists(st.integers(0, c - 1), min_size=50, max_size=50),
        )
    )
)
def test_property_matches_oracle(case):
    c, labels, preds = case
    preds = preds[: len(labels)]
    rep = report_from_labels(labels, preds, c)
    acc, macro, weighted = brute_force_metrics(labels, preds, c)
    assert rep.accuracy == pytest.approx(acc, abs=1e-12)
    assert rep.macro_f1 == pytest.approx(macro, abs=1e-12)
    assert rep.weighted_f1 == pytest.approx(weighted, abs=1e-12)


def test_confusion_rejects_empty_and_out_of_range():
    with pytest.raises(DataError):
        confusion_matrix([], [], 2)
    with pytest.raises(DataError):
        confusion_matrix([0, 2], [0, 1], 2)


def test_average_of_single_report_is_itself():
    rep = report_from_labels([0, 1, 1], [0, 1, 0], 2)
    avg = average_reports([rep])
    assert avg.to_dict() == rep.to_dict()


def test_average_is_hand_mean():
    reports = [
        report_from_labels([0, 0, 1, 1], [0, 1, 1, 1], 2),
        report_from_labels([0, 0, 1, 1], [0, 0, 1, 1], 2),
        report_from_labels([0, 0, 1, 1], [1, 1, 0, 0], 2),
    ]
    avg = average_reports(reports)
    assert avg.accuracy == pytest.approx(sum(r.accuracy for r in reports) / 3, abs=1e-15)
    assert avg.macro_f1 == pytest.approx(sum(r.macro_f1 for r in reports) / 3, abs=1e-15)
    assert avg.weighted_f1 == pytest.approx(sum(r.weighted_f1 for r in reports) / 3, abs=1e-15)
    assert np.array(avg.confusion).sum() == pytest.approx(4.0)


def test_average_requires_same_sample_count():
    a = report_from_labels([0, 1], [0, 1], 2)
    b = report_from_labels([0, 1, 1], [0, 1, 1], 2)
    with pytest.raises(DataError):
        average_reports([a, b])


def test_report_dict_roundtrip():
    rep = report_from_labels([0, 1, 2], [0, 2, 2], 3)
    assert MetricsReport.from_dict(rep.to_dict()) == rep
    assert set(rep.to_dict()) == {
        "accuracy", "macro_f1", "weighted_f1", "confusion", "per_class_f1", "n_samples",
    }
