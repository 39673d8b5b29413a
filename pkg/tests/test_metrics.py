import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.metrics import average_precision_score, roc_auc_score

from locrad.exceptions import DegenerateLabels, ShapeMismatch, ZeroVariance
from locrad.metrics import (
    calibration_bins,
    classification_metrics,
    ece,
    f1_score,
    pr_auc,
    precision_recall_f1,
    r2_score,
    regression_metrics,
    roc_auc,
)


def test_perfect_separation():
    m = classification_metrics([-5, -4, 4, 5], [0, 0, 1, 1])
    assert m["f1"] == 1.0 and m["roc_auc"] == 1.0 and m["pr_auc"] == 1.0


def test_tp_fp_fn_one_each():
    assert precision_recall_f1(1, 1, 1) == (0.5, 0.5, 0.5)
    # logits: +, +, -  vs labels 1, 0, 1 -> TP 1, FP 1, FN 1
    assert f1_score([3.0, 3.0, -3.0], [1, 0, 1]) == pytest.approx(0.5)


def test_constant_scores_auc_half():
    assert roc_auc([0.3] * 6, [0, 1, 0, 1, 1, 0]) == 0.5


def test_auc_one_class():
    with pytest.raises(DegenerateLabels):
        roc_auc([1, 2, 3], [1, 1, 1])
    m = classification_metrics([1, 2, 3], [1, 1, 1])
    assert np.isnan(m["roc_auc"])


def test_length_mismatch():
    with pytest.raises(ShapeMismatch):
        f1_score([1, 2], [1])


@given(
    data=st.lists(st.tuples(st.integers(-5, 5), st.integers(0, 1)), min_size=2, max_size=40).filter(
        lambda d: 0 < sum(y for _, y in d) < len(d)
    )
)
def test_auc_matches_reference(data):
    s = np.array([x for x, _ in data], dtype=float)
    y = np.array([v for _, v in data])
    assert roc_auc(s, y) == pytest.approx(roc_auc_score(y, s), abs=1e-12)
    assert pr_auc(s, y) == pytest.approx(average_precision_score(y, s), abs=1e-12)


@given(
    data=st.lists(st.tuples(st.floats(-3, 3), st.integers(0, 1)), min_size=2, max_size=30).filter(
        lambda d: 0 < sum(y for _, y in d) < len(d)
    )
)
def test_auc_rank_identity(data):
    s = np.array([x for x, _ in data])
    y = np.array([v for _, v in data])
    pos, neg = s[y == 1], s[y == 0]
    u = sum((p > n) + 0.5 * (p == n) for p in pos for n in neg)
    assert roc_auc(s, y) == pytest.approx(u / (len(pos) * len(neg)))


def test_regression_identity():
    assert regression_metrics([1, 2, 3], [1, 2, 3]) == {"r2": 1.0, "mae": 0.0}


def test_regression_mean_prediction():
    y = np.array([1.0, 2.0, 6.0])
    assert r2_score(np.full(3, y.mean()), y) == pytest.approx(0.0)


def test_regression_shift_by_one():
    y = np.array([1.0, 2.0, 3.0])
    m = regression_metrics(y + 1, y)
    # SSE 3, SST 2
    assert m["mae"] == 1.0 and m["r2"] == pytest.approx(1 - 3 / 2)


def test_regression_zero_variance():
    with pytest.raises(ZeroVariance):
        r2_score([1, 2], [3, 3])


def test_ece_calibrated():
    assert ece([0.0, 0.0, 1.0, 1.0], [0, 0, 1, 1]) == 0.0


def test_ece_all_ones_half_labels():
    assert ece([1.0] * 4, [1, 0, 1, 0]) == pytest.approx(0.5)


def test_ece_skips_empty_bins():
    rows = calibration_bins([0.05, 0.95], [0, 1])
    assert sum(r["count"] for r in rows) == 2
    assert ece([0.05, 0.95], [0, 1]) == pytest.approx(0.05)


def test_ece_range():
    with pytest.raises(ValueError):
        ece([1.5], [1])


@given(st.lists(st.tuples(st.floats(-20, 20), st.integers(0, 1)), min_size=1, max_size=30))
def test_classification_metrics_bounded(data):
    s = [x for x, _ in data]
    y = [v for _, v in data]
    m = classification_metrics(s, y)
    for k in ("f1", "precision", "recall", "ece"):
        assert 0 <= m[k] <= 1
