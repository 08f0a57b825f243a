"""Non-adaptive probe plans: grids, uniform designs, random draws.

Uniform designs use good-lattice-point sets. For n points the builder
scores every admissible generator for moduli n and n+1 (the latter with
the zero row left out) by centered L2 discrepancy and keeps the best set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .space import DEFAULT_BOX, HyperPoint, SearchBox
from .surface import SurfaceEvaluator

NORMRAND_MEAN = (5.0, -5.0)
NORMRAND_SD = 5.0


@dataclass
class ProbePlan:
    points: list[HyperPoint]
    generator: str
    seed: int | None = None


def centered_l2_discrepancy(points: np.ndarray) -> float:
    """Centered L2 discrepancy of points in the unit cube."""
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("points must be a 2-D array")
    n, d = x.shape
    shifted = np.abs(x - 0.5)
    term1 = (13.0 / 12.0) ** d
    term2 = (2.0 / n) * np.prod(1.0 + 0.5 * shifted - 0.5 * shifted ** 2, axis=1).sum()
    prod = np.ones((n, n))
    for j in range(d):
        a = shifted[:, j]
        pair = np.abs(x[:, j][:, None] - x[:, j][None, :])
        prod *= 1.0 + 0.5 * a[:, None] + 0.5 * a[None, :] - 0.5 * pair
    term3 = prod.sum() / (n * n)
    return math.sqrt(max(term1 - term2 + term3, 0.0))


@lru_cache(maxsize=None)
def ud_unit(n: int) -> tuple[tuple[float, float], ...]:
    """Best 2-D good-lattice-point set of n points in the unit square."""
    if n < 2:
        raise ValueError(f"uniform design needs at least 2 points, got {n}")
    best: np.ndarray | None = None
    best_disc = math.inf
    i_direct = np.arange(n)
    u1_direct = (i_direct + 0.5) / n
    for h in range(1, n):
        if math.gcd(h, n) != 1:
            continue
        u2 = ((i_direct * h) % n + 0.5) / n
        pts = np.column_stack([u1_direct, u2])
        disc = centered_l2_discrepancy(pts)
        if disc < best_disc:
            best_disc = disc
            best = pts
    m = n + 1
    i_loo = np.arange(1, n + 1)
    u1_loo = (i_loo - 0.5) / n
    for h in range(1, m):
        if math.gcd(h, m) != 1:
            continue
        u2 = ((i_loo * h) % m - 0.5) / n
        pts = np.column_stack([u1_loo, u2])
        disc = centered_l2_discrepancy(pts)
        if disc < best_disc:
            best_disc = disc
            best = pts
    return tuple((float(p[0]), float(p[1])) for p in best)


def grid_points(n: int, box: SearchBox = DEFAULT_BOX) -> ProbePlan:
    """Endpoint-inclusive sqrt(n) x sqrt(n) lattice over the box."""
    m = math.isqrt(n)
    if m * m != n or m < 2:
        raise ValueError(f"grid size must be a perfect square >= 4, got {n}")
    cs = [box.c_lo + i * box.c_span / (m - 1) for i in range(m)]
    gs = [box.g_lo + j * box.g_span / (m - 1) for j in range(m)]
    points = [HyperPoint(c, g) for c in cs for g in gs]
    return ProbePlan(points, generator="grid")


def ud_points(n: int, box: SearchBox = DEFAULT_BOX) -> ProbePlan:
    points = [box.from_unit(u, v) for u, v in ud_unit(n)]
    return ProbePlan(points, generator="ud")


def rand_points(n: int, seed: int, box: SearchBox = DEFAULT_BOX) -> ProbePlan:
    if n < 1:
        raise ValueError(f"need at least 1 point, got {n}")
    rng = np.random.default_rng(seed)
    cs = rng.uniform(box.c_lo, box.c_hi, n)
    gs = rng.uniform(box.g_lo, box.g_hi, n)
    points = [HyperPoint(float(c), float(g)) for c, g in zip(cs, gs)]
    return ProbePlan(points, generator="rand", seed=seed)


def normrand_raw(n: int, seed: int) -> np.ndarray:
    """Pre-clipping draws behind normrand_points; exposed for auditing."""
    rng = np.random.default_rng(seed)
    draws = rng.normal(loc=NORMRAND_MEAN, scale=NORMRAND_SD, size=(n, 2))
    return draws


def normrand_points(n: int, seed: int, box: SearchBox = DEFAULT_BOX) -> ProbePlan:
    if n < 1:
        raise ValueError(f"need at least 1 point, got {n}")
    draws = normrand_raw(n, seed)
    points = [box.clip(HyperPoint(float(c), float(g))) for c, g in draws]
    return ProbePlan(points, generator="normrand", seed=seed)


def run_flat(ev: SurfaceEvaluator, plan: ProbePlan) -> list[HyperPoint]:
    """Evaluate every plan point in order; budget errors propagate."""
    for p in plan.points:
        ev.evaluate(p)
    return ev.best_so_far()


def _neighbor_bounds(values: list[float], x: float, lo: float, hi: float) -> tuple[float, float]:
    below = [v for v in values if v < x]
    above = [v for v in values if v > x]
    return (max(below) if below else lo, min(above) if above else hi)


def run_hier(ev: SurfaceEvaluator, generator: str, n_per_level: int) -> list[HyperPoint]:
    """Two-level search: full-box plan, then the same plan respanned.

    The level-2 box is bounded by the level-1 winner's nearest distinct
    level-1 coordinate values in each dimension, truncated at the outer box
    when the winner sits on the boundary. The returned tie set is the argmax
    over the winner plus all level-2 evaluations.
    """
    if generator == "grid":
        builder = grid_points
    elif generator == "ud":
        builder = ud_points
    else:
        raise ValueError(f"hierarchical search supports grid or ud, got {generator!r}")

    box = ev.box
    level1 = builder(n_per_level, box)
    evals1 = [ev.evaluate(p) for p in level1.points]
    best_acc = max(e.accuracy for e in evals1)
    winner = next(e for e in evals1 if e.accuracy == best_acc)
    x = winner.point

    c_values = sorted({e.point.log2c for e in evals1})
    g_values = sorted({e.point.log2gamma for e in evals1})
    c_lo, c_hi = _neighbor_bounds(c_values, x.log2c, box.c_lo, box.c_hi)
    g_lo, g_hi = _neighbor_bounds(g_values, x.log2gamma, box.g_lo, box.g_hi)
    sub_box = SearchBox(c_lo, c_hi, g_lo, g_hi)

    level2 = builder(n_per_level, sub_box)
    evals2 = [ev.evaluate(p) for p in level2.points]

    candidates = [(x, winner.accuracy)] + [(e.point, e.accuracy) for e in evals2]
    top = max(acc for _, acc in candidates)
    seen: set[tuple[int, int]] = set()
    ties: list[HyperPoint] = []
    for point, acc in candidates:
        if acc == top and point.key() not in seen:
            seen.add(point.key())
            ties.append(point)
    return ties
