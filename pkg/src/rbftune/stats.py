"""Statistical comparison of algorithms and selection rules.

Three tools: a percentile bootstrap for the mean of per-dataset gains, a
tie-corrected Friedman rank test across blocked measurements, and the
Nemenyi post-hoc test with its critical difference. A fourth routine
applies the Friedman machinery to tie-breaking rules, ranking rules by
the future accuracy of the point each one picks out of a shared tie set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.stats import chi2, rankdata, studentized_range

from .selection import RULES, select
from .selection import TieSet
from .space import HyperPoint

BOOTSTRAP_REPLICATES = 5000


@dataclass(frozen=True)
class CiResult:
    """Sample mean with a percentile bootstrap confidence interval."""

    mean: float
    low: float
    high: float
    replicates: int
    seed: int


@dataclass(frozen=True)
class RankTestResult:
    statistic: float
    df: int
    p_value: float
    mean_ranks: tuple[float, ...]
    treatments: tuple[str, ...] | None = None


@dataclass(frozen=True)
class NemenyiResult:
    """Pairwise p-values plus the critical mean-rank difference at alpha."""

    p_values: tuple[tuple[float, ...], ...]
    critical_difference: float
    mean_ranks: tuple[float, ...]
    alpha: float


@dataclass
class SelectionCase:
    """One tie set and a way to score any of its members out of sample."""

    tie_set: TieSet
    future_accuracy: Callable[[HyperPoint], float]


def bootstrap_ci_mean(values: Sequence[float],
                      replicates: int = BOOTSTRAP_REPLICATES,
                      level: float = 0.95, seed: int = 0) -> CiResult:
    """Percentile bootstrap CI for the mean.

    Resamples the values with replacement `replicates` times and takes
    the (1-level)/2 and 1-(1-level)/2 percentiles of the resampled
    means. Seeded, so the interval is reproducible.
    """
    data = np.asarray(values, dtype=float)
    if data.ndim != 1 or data.size < 2:
        raise ValueError("bootstrap needs at least 2 values")
    if not np.all(np.isfinite(data)):
        raise ValueError("bootstrap values must be finite")
    if not 0.0 < level < 1.0:
        raise ValueError("confidence level must be in (0, 1)")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, data.size, size=(replicates, data.size))
    means = data[idx].mean(axis=1)
    tail = 100.0 * (1.0 - level) / 2.0
    low, high = np.percentile(means, [tail, 100.0 - tail])
    return CiResult(mean=float(data.mean()), low=float(low), high=float(high),
                    replicates=replicates, seed=seed)


def friedman_test(matrix, treatments: Sequence[str] | None = None
                  ) -> RankTestResult:
    """Tie-corrected Friedman test on an (n blocks) x (k treatments) matrix.

    Rows are ranked ascending with ties averaged. The statistic is

        (k-1) * sum_j (R_j - n(k+1)/2)^2 / (sum of squared ranks - n k (k+1)^2 / 4)

    which reduces to the textbook chi-square form when there are no
    ties. A fully tied matrix makes the expression 0/0; that is reported
    as statistic 0 and p-value 1 (no evidence of any difference). The
    p-value is the chi-square upper tail with k-1 degrees of freedom.
    """
    data = np.asarray(matrix, dtype=float)
    if data.ndim != 2:
        raise ValueError("matrix must be 2-dimensional")
    n, k = data.shape
    if n < 2 or k < 2:
        raise ValueError("need at least 2 blocks and 2 treatments")
    if treatments is not None and len(treatments) != k:
        raise ValueError("treatment names must match the number of columns")
    ranks = np.apply_along_axis(rankdata, 1, data)
    column_sums = ranks.sum(axis=0)
    numerator = (k - 1) * float(((column_sums - n * (k + 1) / 2.0) ** 2).sum())
    denominator = float((ranks ** 2).sum()) - n * k * (k + 1) ** 2 / 4.0
    if denominator == 0.0:
        statistic, p_value = 0.0, 1.0
    else:
        statistic = numerator / denominator
        p_value = float(chi2.sf(statistic, k - 1))
    return RankTestResult(statistic=statistic, df=k - 1, p_value=p_value,
                          mean_ranks=tuple(float(s) / n for s in column_sums),
                          treatments=None if treatments is None else tuple(treatments))


def nemenyi_test(matrix, alpha: float = 0.05) -> NemenyiResult:
    """All-pairs Nemenyi post-hoc comparison on a blocked rank matrix.

    For treatments a, b the observed standardized difference is
    |mean_rank_a - mean_rank_b| / sqrt(k(k+1)/(6n)); its p-value is the
    upper tail of the studentized range distribution (k groups, infinite
    df) evaluated at sqrt(2) times that difference. Two mean ranks
    differ significantly at level alpha when they are further apart than
    the critical difference.
    """
    data = np.asarray(matrix, dtype=float)
    if data.ndim != 2:
        raise ValueError("matrix must be 2-dimensional")
    n, k = data.shape
    if n < 2 or k < 2:
        raise ValueError("need at least 2 blocks and 2 treatments")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    ranks = np.apply_along_axis(rankdata, 1, data)
    mean_ranks = ranks.mean(axis=0)
    scale = math.sqrt(k * (k + 1) / (6.0 * n))
    p_matrix = np.ones((k, k))
    for a in range(k):
        for b in range(a + 1, k):
            q_observed = abs(mean_ranks[a] - mean_ranks[b]) / scale
            p = float(studentized_range.sf(q_observed * math.sqrt(2.0),
                                           k, np.inf))
            p_matrix[a, b] = p_matrix[b, a] = min(1.0, p)
    q_critical = float(studentized_range.ppf(1.0 - alpha, k, np.inf))
    critical_difference = q_critical / math.sqrt(2.0) * scale
    return NemenyiResult(
        p_values=tuple(tuple(row) for row in p_matrix),
        critical_difference=critical_difference,
        mean_ranks=tuple(float(r) for r in mean_ranks), alpha=alpha)


def selection_rule_comparison(cases: Sequence[SelectionCase],
                              rules: Sequence[str] = RULES,
                              min_tie_size: int = 2,
                              seed: int = 0) -> RankTestResult:
    """Friedman test over tie-breaking rules scored by future accuracy.

    Cases whose tie set is smaller than min_tie_size are dropped (every
    rule picks the same point there, telling us nothing). Each surviving
    case is one block; each rule's pick is scored by the case's
    future-accuracy callable, and accuracies are negated before ranking
    so mean rank 1 is the best rule. The random rule draws with seed
    seed+i for the i-th qualifying case.
    """
    qualifying = [c for c in cases if len(c.tie_set) >= min_tie_size]
    if len(qualifying) < 2:
        raise ValueError("no qualifying tie sets")
    matrix = np.empty((len(qualifying), len(rules)))
    for i, case in enumerate(qualifying):
        for j, rule in enumerate(rules):
            point = select(case.tie_set, rule, seed=seed + i)
            matrix[i, j] = -case.future_accuracy(point)
    return friedman_test(matrix, treatments=tuple(rules))
