"""Searchers that fix gamma from training-set statistics and then search C.

Three families estimate gamma without spending surface evaluations: a
pairwise-distance quantile (sigest_gamma), the inverse feature count
(skl_gamma), and the kernel-space class-center separation (dbtc_gamma,
with a sampled variant). A fourth family links gamma to C through the
asymptotic line log2gamma = log2C_hat - log2C. Only the C searches touch
the cross-validation surface, so the evaluation budget of each searcher
is exactly its C-grid size (or both grid sizes, for the two-stage line
search).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .space import HyperPoint, SearchBox
from .surface import Evaluation, SurfaceEvaluator

DBTC_GRID_SIZE = 19


@dataclass(frozen=True)
class GammaEstimate:
    """A gamma value fixed from data statistics, with how it was obtained."""

    gamma: float
    method: str
    diagnostics: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not (self.gamma > 0.0 and math.isfinite(self.gamma)):
            raise ValueError(f"gamma must be a positive real, got {self.gamma}")


def _pairwise_sq_dists(X: np.ndarray) -> np.ndarray:
    """Condensed vector of squared Euclidean distances over unordered pairs."""
    diff = X[:, None, :] - X[None, :, :]
    full = (diff * diff).sum(axis=-1)
    iu = np.triu_indices(X.shape[0], k=1)
    return full[iu]


def sigest_gamma(features: np.ndarray, seed: int) -> GammaEstimate:
    """Median-distance heuristic: gamma = 1 / median pairwise squared
    distance over a seeded half sample (at least 2 rows, drawn without
    replacement).
    """
    X = np.asarray(features, dtype=np.float64)
    n = X.shape[0]
    if n < 2:
        raise ValueError("need at least 2 rows to estimate gamma")
    rng = np.random.default_rng(seed)
    size = max(2, n // 2)
    idx = rng.choice(n, size=size, replace=False)
    sq = _pairwise_sq_dists(X[idx])
    median = float(np.median(sq))
    if median <= 0.0:
        raise ValueError("degenerate geometry")
    return GammaEstimate(1.0 / median, "sigest", {
        "quantile": 0.5,
        "sample_indices": [int(i) for i in idx],
        "median_sq_dist": median,
    })


def skl_gamma(n_features: int) -> GammaEstimate:
    """Dimension heuristic: gamma = 1 / feature count."""
    if n_features < 1:
        raise ValueError("need at least one feature")
    return GammaEstimate(1.0 / n_features, "skl", {"n_features": int(n_features)})


def _bernoulli_class_sample(rng: np.random.Generator, rows: np.ndarray,
                            fraction: float) -> np.ndarray:
    mask = rng.random(rows.shape[0]) < fraction
    return rows[mask]


def dbtc_gamma(features: np.ndarray, labels: np.ndarray,
               grid_size: int = DBTC_GRID_SIZE,
               sample_fraction: float = 1.0,
               seed: int = 0) -> GammaEstimate:
    """Pick gamma maximizing the kernel-space distance between class centers.

    For each gamma on an endpoint-inclusive grid over log2gamma in
    [-15, 3], computes D^2 = S++/n+^2 + S--/n-^2 - 2 S+-/(n+ n-), where
    S_ab sums exp(-gamma ||x_i - x_j||^2) over all (i, j) with i in class
    a and j in class b (self pairs included). Ties break toward the
    smaller gamma. With sample_fraction < 1 each row enters a seeded
    sample independently with that probability; if a class comes up empty
    the draw is repeated once before failing.
    """
    if not 0.0 < sample_fraction <= 1.0:
        raise ValueError(f"sample_fraction must be in (0, 1], got {sample_fraction}")
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    pos = X[y == 1]
    neg = X[y == 0]
    if pos.shape[0] == 0 or neg.shape[0] == 0:
        raise ValueError("both classes must be present")

    sampled = sample_fraction < 1.0
    if sampled:
        rng = np.random.default_rng(seed)
        for attempt in range(2):
            p = _bernoulli_class_sample(rng, pos, sample_fraction)
            m = _bernoulli_class_sample(rng, neg, sample_fraction)
            if p.shape[0] > 0 and m.shape[0] > 0:
                pos, neg = p, m
                break
        else:
            raise ValueError("empty class after sampling")

    def sq_block(A: np.ndarray, B: np.ndarray) -> np.ndarray:
        diff = A[:, None, :] - B[None, :, :]
        return (diff * diff).sum(axis=-1)

    d_pp = sq_block(pos, pos)
    d_nn = sq_block(neg, neg)
    d_pn = sq_block(pos, neg)
    n_p, n_n = pos.shape[0], neg.shape[0]

    grid = np.linspace(-15.0, 3.0, grid_size)
    curve = []
    for log2g in grid:
        g = 2.0 ** log2g
        d2 = (np.exp(-g * d_pp).sum() / n_p ** 2
              + np.exp(-g * d_nn).sum() / n_n ** 2
              - 2.0 * np.exp(-g * d_pn).sum() / (n_p * n_n))
        curve.append(float(d2))

    best = 0
    for i in range(1, grid_size):
        if curve[i] > curve[best]:
            best = i
    method = "sdbtc" if sampled else "dbtc"
    return GammaEstimate(2.0 ** float(grid[best]), method, {
        "log2gamma_grid": [float(v) for v in grid],
        "d2_curve": curve,
        "n_pos": n_p,
        "n_neg": n_n,
    })


def _tie_set(evals: list[Evaluation]) -> list[HyperPoint]:
    best = max(e.accuracy for e in evals)
    out: list[HyperPoint] = []
    seen = set()
    for e in evals:
        if e.accuracy == best and e.point.key() not in seen:
            seen.add(e.point.key())
            out.append(e.point)
    return out


def fixed_gamma_c_search(ev: SurfaceEvaluator, gamma: float,
                         n_c: int) -> list[HyperPoint]:
    """Probe an endpoint-inclusive n_c-point grid over log2C at a fixed
    gamma (clipped into the box) and return the tie set of maximizers.
    n_c = 1 probes only the default C = 1.
    """
    if n_c < 1:
        raise ValueError(f"n_c must be at least 1, got {n_c}")
    box = ev.box
    log2g = min(max(math.log2(gamma), box.g_lo), box.g_hi)
    if n_c == 1:
        cs = [min(max(0.0, box.c_lo), box.c_hi)]
    else:
        cs = [float(v) for v in np.linspace(box.c_lo, box.c_hi, n_c)]
    evals = [ev.evaluate(HyperPoint(c, log2g)) for c in cs]
    return _tie_set(evals)


def _line_point(total: float, log2c: float,
                box: SearchBox) -> tuple[float, float]:
    """In-box point on the line log2gamma = total - log2C.

    The gamma coordinate is the exact floating-point difference
    total - log2C, so line membership is checkable bitwise in that form.
    Rounding can push the difference a last-place unit outside the gamma
    range at the interval ends; the C coordinate then steps inward by
    ulps until the point is in the box.
    """
    a = min(max(log2c, box.c_lo), box.c_hi)
    for _ in range(8):
        b = total - a
        if box.g_lo <= b <= box.g_hi:
            return a, b
        a = math.nextafter(a, math.inf if b > box.g_hi else -math.inf)
        if not box.c_lo <= a <= box.c_hi:
            break
    raise AssertionError("no representable point on the line inside the box")


def asymp_search(ev_linear: SurfaceEvaluator, ev_rbf: SurfaceEvaluator,
                 n_pair: int) -> list[HyperPoint]:
    """Two-stage line search.

    Stage 1 probes an n_pair-point grid over log2C with the linear-kernel
    surface and takes the best C_hat (ties toward smaller C; the gamma
    coordinate is pinned to 0, clipped into the box, and ignored by the
    linear surface). Stage 2 places n_pair points on the line
    log2gamma = log2C_hat - log2C, evenly spaced over its intersection
    with the box, probes them on the RBF surface, and returns the tie set.
    Every stage-2 point satisfies log2gamma == log2C_hat - log2C exactly
    (bitwise, in that difference form).
    """
    if n_pair < 1:
        raise ValueError(f"n_pair must be at least 1, got {n_pair}")
    box = ev_linear.box
    pin_g = min(max(0.0, box.g_lo), box.g_hi)
    if n_pair == 1:
        cs = [box.c_lo]
    else:
        cs = [float(v) for v in np.linspace(box.c_lo, box.c_hi, n_pair)]
    stage1 = [ev_linear.evaluate(HyperPoint(c, pin_g)) for c in cs]
    c_hat = stage1[0].point.log2c
    best_acc = stage1[0].accuracy
    for e in stage1[1:]:
        if e.accuracy > best_acc:
            best_acc, c_hat = e.accuracy, e.point.log2c

    rbox = ev_rbf.box
    lo = max(rbox.c_lo, c_hat - rbox.g_hi)
    hi = min(rbox.c_hi, c_hat - rbox.g_lo)
    if lo > hi:
        raise AssertionError("line misses the box; C_hat outside the C range")
    if n_pair == 1:
        line_cs = [lo]
    else:
        line_cs = [float(v) for v in np.linspace(lo, hi, n_pair)]
    stage2 = []
    for c in line_cs:
        a, b = _line_point(c_hat, c, rbox)
        stage2.append(ev_rbf.evaluate(HyperPoint(a, b)))
    return _tie_set(stage2)
