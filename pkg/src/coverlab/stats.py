"""Small statistics helpers shared by the experiments.

CI methods are fixed across the artifact: Wilson for proportions, t for means.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps


def wilson_interval(successes: int, trials: int, z: float = 3.0) -> tuple[float, float]:
    """Wilson score interval; defaults to a 3-sigma-style z."""
    if trials <= 0:
        raise ValueError("need at least one trial")
    p = successes / trials
    denom = 1 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials**2)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass
class MeanSummary:
    count: int
    mean: float
    var: float
    ci_lo: float
    ci_hi: float

    @property
    def se(self) -> float:
        return math.sqrt(self.var / self.count) if self.count > 1 else float("inf")


def summarize_mean(values, z: float = 3.0) -> MeanSummary:
    """Mean with a t-style interval of half-width z standard errors."""
    arr = np.asarray(values, dtype=float)
    n = arr.size
    if n == 0:
        raise ValueError("no values")
    mean = float(arr.mean())
    var = float(arr.var(ddof=1)) if n > 1 else 0.0
    se = math.sqrt(var / n) if n > 1 else float("inf")
    return MeanSummary(count=n, mean=mean, var=var, ci_lo=mean - z * se, ci_hi=mean + z * se)


def two_sample_chisquare(counts_a, counts_b, min_expected: float = 5.0) -> tuple[float, float]:
    """Pooled-bin two-sample chi-square; returns (statistic, p_value).

    Bins are merged greedily from the right until every pooled expected count
    reaches ``min_expected`` in both samples.
    """
    a = np.asarray(counts_a, dtype=float)
    b = np.asarray(counts_b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("count vectors must align")
    bins_a, bins_b = [], []
    acc_a = acc_b = 0.0
    for va, vb in zip(a, b):
        acc_a += va
        acc_b += vb
        if acc_a >= min_expected and acc_b >= min_expected:
            bins_a.append(acc_a)
            bins_b.append(acc_b)
            acc_a = acc_b = 0.0
    if acc_a or acc_b:
        if bins_a:
            bins_a[-1] += acc_a
            bins_b[-1] += acc_b
        else:
            bins_a.append(acc_a)
            bins_b.append(acc_b)
    a = np.array(bins_a)
    b = np.array(bins_b)
    if a.size < 2:
        raise ValueError("too few populated bins for a chi-square test")
    na, nb = a.sum(), b.sum()
    k1 = math.sqrt(nb / na)
    k2 = math.sqrt(na / nb)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = (k1 * a - k2 * b) ** 2 / (a + b)
    stat = float(np.nansum(terms))
    df = a.size - 1
    return stat, float(sps.chi2.sf(stat, df))


def linear_fit_r2(x, y) -> tuple[float, float, float]:
    """Least-squares slope, intercept, and R^2."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3:
        raise ValueError("need at least 3 points")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_res = float((resid**2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2
