import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import enumerate_p, holm_stepwise
from locrad.exceptions import TooFewPairs, TooFewPoints, ZeroPooledVariance
from locrad.stats import (
    MetricReport,
    apply_holm,
    ci95_t,
    cohens_d,
    exact_wplus_counts,
    holm_bonferroni,
    paired_comparison,
    spearman,
    spearman_bootstrap,
    wilcoxon_signed_rank,
)


def test_all_positive_five():
    res = wilcoxon_signed_rank([1, 2, 3, 4, 5], [0] * 5)
    assert res.p_value == pytest.approx(2 / 32)
    assert res.statistic == 15 and res.method == "exact"


def test_all_zero_differences():
    with pytest.raises(TooFewPairs):
        wilcoxon_signed_rank([1, 2, 3, 4, 5], [1, 2, 3, 4, 5])


def test_antisymmetry():
    a = [0.3, 0.5, 0.1, 0.9, 0.4, 0.45, 0.2]
    b = [0.2, 0.1, 0.3, 0.5, 0.35, 0.1, 0.25]
    assert wilcoxon_signed_rank(a, b).p_value == pytest.approx(wilcoxon_signed_rank(b, a).p_value)


def test_counts_total():
    assert sum(exact_wplus_counts([1, 2, 3])) == 8


@pytest.mark.parametrize("seed", range(20))
def test_exact_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 11))
    # rounded values create ties and zeros
    d = np.round(rng.normal(size=n), 1)
    if (d != 0).sum() < 5:
        return
    assert wilcoxon_signed_rank(d, np.zeros(n), exact=True).p_value == pytest.approx(enumerate_p(d))


def test_normal_approximation_large_n():
    rng = np.random.default_rng(0)
    a = rng.normal(0.3, 1, 40)
    b = rng.normal(0.0, 1, 40)
    res = wilcoxon_signed_rank(a, b)
    from scipy.stats import wilcoxon

    ref = wilcoxon(a, b, correction=True, method="approx")
    assert res.method == "normal"
    assert res.p_value == pytest.approx(ref.pvalue, rel=1e-9)


def test_holm_examples():
    assert holm_bonferroni([0.01, 0.04]) == pytest.approx([0.02, 0.04])
    assert holm_bonferroni([0.3]) == [0.3]
    assert holm_bonferroni([0.5, 0.9]) == [1.0, 1.0]


def test_holm_rejects_bad_p():
    with pytest.raises(ValueError):
        holm_bonferroni([0.0, 0.5])


@given(st.lists(st.floats(1e-6, 1.0), min_size=1, max_size=12))
def test_holm_properties(ps):
    adj = holm_bonferroni(ps)
    order = np.argsort(ps, kind="stable")
    sorted_adj = np.array(adj)[order]
    assert np.all(np.diff(sorted_adj) >= -1e-15)
    assert all(q >= p - 1e-15 and q <= 1 for p, q in zip(ps, adj))
    assert adj == pytest.approx(holm_stepwise(ps))


def test_cohens_d_examples():
    assert cohens_d([1, 2, 3], [1, 2, 3]) == 0.0
    # means 1 and 0, each sample variance 1
    a = [0.0, 1.0, 2.0]
    b = [-1.0, 0.0, 1.0]
    assert cohens_d(a, b) == pytest.approx(1.0)
    assert cohens_d(b, a) == pytest.approx(-1.0)


def test_cohens_d_constant_samples():
    with pytest.raises(ZeroPooledVariance):
        cohens_d([1, 1, 1], [2, 2, 2])


def test_paired_comparison_and_holm():
    a = [0.9, 0.85, 0.88, 0.92, 0.91, 0.87]
    b = [0.5, 0.55, 0.52, 0.49, 0.51, 0.53]
    res = apply_holm([paired_comparison(a, b, "x"), paired_comparison(b, a, "y")])
    assert res[0].effect_size_d > 0 > res[1].effect_size_d
    assert all(r.adjusted_p >= r.p_value for r in res)


def test_spearman_table_pairs():
    rho, ci = spearman_bootstrap([0, 1, 2, 3], [-0.28, 0.02, 0.49, 0.32])
    assert rho == pytest.approx(0.8, abs=1e-9)
    assert -1 <= ci[0] <= ci[1] <= 1


def test_spearman_monotone_and_negated():
    x = np.arange(10.0)
    assert spearman(x, x**3)[0] == pytest.approx(1.0)
    assert spearman(x, -x)[0] == pytest.approx(-1.0)


def test_spearman_ties_degenerate():
    rho, degenerate = spearman([0, 1, 2, 3], [0.5] * 4)
    assert rho == 0.0 and degenerate


def test_spearman_matches_scipy():
    from scipy.stats import spearmanr

    rng = np.random.default_rng(1)
    x, y = rng.integers(0, 5, 30), rng.integers(0, 5, 30)
    assert spearman(x, y)[0] == pytest.approx(spearmanr(x, y)[0])


def test_spearman_too_few():
    with pytest.raises(TooFewPoints):
        spearman_bootstrap([1, 2], [1, 2])


def test_bootstrap_deterministic():
    a = spearman_bootstrap([0, 1, 2, 3, 4], [1, 3, 2, 5, 4], n_boot=500, seed=3)
    b = spearman_bootstrap([0, 1, 2, 3, 4], [1, 3, 2, 5, 4], n_boot=500, seed=3)
    assert a.ci95 == b.ci95


def test_ci_width_shrinks_with_root_n():
    rng = np.random.default_rng(0)

    def mean_width(n):
        ws = [np.subtract(*ci95_t(rng.normal(size=n))[::-1]) for _ in range(2000)]
        return float(np.mean(ws))

    ratio = mean_width(100) / mean_width(400)
    assert ratio == pytest.approx(2.0, rel=0.2)


def test_ci_t_df():
    v = [1.0, 2.0, 3.0, 4.0, 5.0]
    lo, hi = ci95_t(v)
    half = 2.7764451051977987 * np.std(v, ddof=1) / math.sqrt(5)
    assert (lo, hi) == pytest.approx((3 - half, 3 + half))
    assert all(math.isnan(x) for x in ci95_t([1.0]))


def test_metric_report():
    r = MetricReport("f1", [0.5, 0.7])
    assert r.mean == pytest.approx(0.6)
    assert r.to_dict()["name"] == "f1"
