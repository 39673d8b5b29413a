"""Paired tests, multiplicity correction, effect sizes and intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as _st
from scipy.stats import rankdata

from .exceptions import TooFewPairs, TooFewPoints, ZeroPooledVariance
from .utils import derive_rng

EXACT_MAX_N = 12


@dataclass
class TestResult:
    statistic: float
    p_value: float
    n: int
    adjusted_p: float | None = None
    effect_size_d: float | None = None
    method: str = ""

    def to_dict(self):
        return {
            "statistic": self.statistic,
            "p_value": self.p_value,
            "adjusted_p": self.adjusted_p,
            "effect_size_d": self.effect_size_d,
            "n": self.n,
            "method": self.method,
        }


def signed_ranks(a, b):
    """Nonzero differences and their mid-ranks by absolute value."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    d = d[d != 0]
    return d, rankdata(np.abs(d))


def exact_wplus_counts(ranks) -> np.ndarray:
    """Number of sign patterns giving each value of ``2 * W+``.

    Ranks are doubled so mid-ranks stay integral; entry ``s`` counts
    patterns with ``2 * W+ == s``.
    """
    r2 = np.rint(2 * np.asarray(ranks)).astype(int)
    counts = np.zeros(int(r2.sum()) + 1, dtype=object)
    counts[0] = 1
    for r in r2:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: len(counts) - r]
        counts = counts + shifted
    return counts


def _exact_p(ranks, w_plus) -> float:
    counts = exact_wplus_counts(ranks)
    s = int(round(2 * w_plus))
    total = 2 ** len(ranks)
    le = int(counts[: s + 1].sum())
    ge = int(counts[s:].sum())
    return min(1.0, 2 * min(le, ge) / total)


def wilcoxon_signed_rank(paired_a, paired_b, exact: bool | None = None) -> TestResult:
    """Two-sided signed-rank test; zero differences are dropped.

    Exact enumeration for ``n <= 12`` (or when ``exact=True``), otherwise the
    normal approximation with continuity and tie corrections. The reported
    statistic is ``W+``, the rank sum of positive differences.
    """
    a = np.asarray(paired_a, dtype=float)
    b = np.asarray(paired_b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("paired samples differ in length")
    d, r = signed_ranks(a, b)
    n = len(d)
    if n < 5:
        raise TooFewPairs(f"{n} nonzero differences; need at least 5")
    w_plus = float(r[d > 0].sum())
    use_exact = n <= EXACT_MAX_N if exact is None else exact
    if use_exact:
        return TestResult(w_plus, _exact_p(r, w_plus), n, method="exact")
    mu = n * (n + 1) / 4.0
    _, t = np.unique(r, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float((t**3 - t).sum()) / 48.0
    z = max(abs(w_plus - mu) - 0.5, 0.0) / math.sqrt(var)
    p = min(1.0, 2 * _st.norm.sf(z))
    return TestResult(w_plus, float(p), n, method="normal")


def holm_bonferroni(p_values) -> list[float]:
    p = np.asarray(p_values, dtype=float)
    if ((p <= 0) | (p > 1)).any():
        raise ValueError("p-values must lie in (0, 1]")
    m = len(p)
    order = np.argsort(p, kind="stable")
    adj = np.empty(m)
    running = 0.0
    for i, j in enumerate(order):
        running = max(running, min(1.0, (m - i) * p[j]))
        adj[j] = running
    return adj.tolist()


def cohens_d(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise ValueError("each sample needs at least 2 values")
    na, nb = len(a), len(b)
    pooled = ((na - 1) * a.var(ddof=1) + (nb - 1) * b.var(ddof=1)) / (na + nb - 2)
    diff = a.mean() - b.mean()
    if pooled == 0:
        if diff == 0:
            return 0.0
        raise ZeroPooledVariance("both samples are constant")
    return float(diff / math.sqrt(pooled))


def paired_comparison(a, b, label: str = "") -> TestResult:
    """Wilcoxon test of ``a`` vs ``b`` with Cohen's d attached."""
    res = wilcoxon_signed_rank(a, b)
    try:
        res.effect_size_d = cohens_d(a, b)
    except ZeroPooledVariance:
        res.effect_size_d = math.copysign(math.inf, float(np.mean(a) - np.mean(b)))
    res.method = f"{res.method} {label}".strip()
    return res


def apply_holm(results: list[TestResult]) -> list[TestResult]:
    adj = holm_bonferroni([r.p_value for r in results])
    for r, q in zip(results, adj):
        r.adjusted_p = q
    return results


# ---------------------------------------------------------------------------
# correlation


def _rank_pearson_rows(X, Y):
    """Row-wise Pearson correlation of rank-transformed rows; 0 if degenerate."""
    rx = rankdata(X, axis=1)
    ry = rankdata(Y, axis=1)
    rx -= rx.mean(axis=1, keepdims=True)
    ry -= ry.mean(axis=1, keepdims=True)
    num = (rx * ry).sum(axis=1)
    den = np.sqrt((rx * rx).sum(axis=1) * (ry * ry).sum(axis=1))
    out = np.zeros(len(num))
    ok = den > 0
    out[ok] = num[ok] / den[ok]
    return out


@dataclass
class SpearmanResult:
    rho: float
    ci95: tuple[float, float]
    degenerate: bool = False
    n: int = 0
    n_boot: int = 0
    boot: np.ndarray | None = field(default=None, repr=False)

    def __iter__(self):
        yield self.rho
        yield self.ci95

    def to_dict(self):
        return {"rho": self.rho, "ci95": list(self.ci95), "degenerate": self.degenerate, "n": self.n, "n_boot": self.n_boot}


def spearman(x, y) -> tuple[float, bool]:
    """Rank-transform Pearson; ``(0.0, True)`` when either side is constant."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    rho = float(_rank_pearson_rows(x[None], y[None])[0])
    degenerate = np.ptp(x) == 0 or np.ptp(y) == 0
    return rho, bool(degenerate)


def spearman_bootstrap(x, y, n_boot: int = 10000, seed: int = 0) -> SpearmanResult:
    """Spearman rho with a percentile bootstrap CI over paired resamples.

    Resamples whose ranks are constant contribute rho = 0.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) != len(y):
        raise ValueError("x and y differ in length")
    if len(x) < 3:
        raise TooFewPoints("Spearman correlation needs at least 3 points")
    if n_boot < 1:
        raise ValueError("n_boot must be positive")
    rho, degenerate = spearman(x, y)
    rng = derive_rng(seed, "bootstrap")
    idx = rng.integers(0, len(x), size=(n_boot, len(x)))
    boot = _rank_pearson_rows(x[idx], y[idx])
    lo, hi = np.percentile(boot, [2.5, 97.5])
    return SpearmanResult(rho, (float(lo), float(hi)), degenerate, len(x), n_boot, boot)


# ---------------------------------------------------------------------------
# summaries


def ci95_t(values) -> tuple[float, float]:
    """Two-sided 95% t interval for the mean, df = n - 1."""
    v = np.asarray(values, dtype=float)
    n = len(v)
    if n < 2:
        return (float("nan"), float("nan"))
    half = _st.t.ppf(0.975, n - 1) * v.std(ddof=1) / math.sqrt(n)
    m = v.mean()
    return (float(m - half), float(m + half))


@dataclass
class MetricReport:
    name: str
    values: list[float]

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def std(self) -> float:
        return float(np.std(self.values, ddof=1)) if len(self.values) > 1 else 0.0

    @property
    def ci95(self) -> tuple[float, float]:
        return ci95_t(self.values)

    def to_dict(self):
        return {"name": self.name, "values": list(self.values), "mean": self.mean, "std": self.std, "ci95": list(self.ci95)}
