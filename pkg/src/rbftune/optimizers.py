"""Derivative-free search over the box: simplex, trust region, annealing,
swarm, and evolution strategy.

Every optimizer maximizes the evaluator's objective, clips candidates into
the box before evaluating, treats the budget-exhausted error as its stop
signal, and returns the argmax over its own evaluation log. Identical
(seed, surface) pairs replay identical logs: all randomness flows from one
numpy Generator per run and evaluation order is fixed.
"""

from __future__ import annotations

import math

import numpy as np

from .space import HyperPoint, SearchBox
from .surface import BudgetExhausted, SurfaceEvaluator

PSO_OMEGA = 0.7298
PSO_C1 = 1.49618
PSO_C2 = 1.49618
SA_COOLING = 0.95
SA_PROBES = 5


def _point(x) -> HyperPoint:
    return HyperPoint(float(x[0]), float(x[1]))


def _spans(box: SearchBox) -> np.ndarray:
    return np.array([box.c_span, box.g_span])


def _lo(box: SearchBox) -> np.ndarray:
    return np.array([box.c_lo, box.g_lo])


def _hi(box: SearchBox) -> np.ndarray:
    return np.array([box.c_hi, box.g_hi])


def _clip(x: np.ndarray, box: SearchBox) -> np.ndarray:
    return np.clip(x, _lo(box), _hi(box))


def _random_in_box(rng: np.random.Generator, box: SearchBox) -> np.ndarray:
    return rng.uniform(_lo(box), _hi(box))


def nelder_mead(ev: SurfaceEvaluator, budget: int, seed: int) -> list[HyperPoint]:
    """Simplex search from the box center with random in-box restarts.

    The initial simplex is axis aligned with sides one tenth of each box
    dimension. On convergence (tiny simplex or flat values) the search
    restarts from a uniform random point and keeps spending the budget.
    """
    box = ev.box
    rng = np.random.default_rng(seed)
    steps = _spans(box) / 10.0

    def fresh_simplex(origin: np.ndarray) -> list[np.ndarray]:
        return [_clip(origin, box),
                _clip(origin + np.array([steps[0], 0.0]), box),
                _clip(origin + np.array([0.0, steps[1]]), box)]

    try:
        vertices = fresh_simplex(np.array([box.center.log2c, box.center.log2gamma]))
        values = [ev.evaluate(_point(v)).accuracy for v in vertices]
        while True:
            order = sorted(range(3), key=lambda i: -values[i])
            vertices = [vertices[i] for i in order]
            values = [values[i] for i in order]
            size = max(np.max(np.abs(vertices[0] - vertices[1])),
                       np.max(np.abs(vertices[0] - vertices[2])))
            if size < 1e-6 or values[0] - values[2] < 1e-10:
                vertices = fresh_simplex(_random_in_box(rng, box))
                values = [ev.evaluate(_point(v)).accuracy for v in vertices]
                continue
            centroid = (vertices[0] + vertices[1]) / 2.0
            worst = vertices[2]
            reflected = _clip(centroid + (centroid - worst), box)
            f_r = ev.evaluate(_point(reflected)).accuracy
            if f_r > values[0]:
                expanded = _clip(centroid + 2.0 * (centroid - worst), box)
                f_e = ev.evaluate(_point(expanded)).accuracy
                if f_e > f_r:
                    vertices[2], values[2] = expanded, f_e
                else:
                    vertices[2], values[2] = reflected, f_r
            elif f_r > values[1]:
                vertices[2], values[2] = reflected, f_r
            else:
                if f_r > values[2]:
                    contracted = _clip(centroid + 0.5 * (centroid - worst), box)
                else:
                    contracted = _clip(centroid - 0.5 * (centroid - worst), box)
                f_c = ev.evaluate(_point(contracted)).accuracy
                if f_c > max(f_r, values[2]):
                    vertices[2], values[2] = contracted, f_c
                else:
                    # Shrink toward the best vertex.
                    for i in (1, 2):
                        vertices[i] = _clip(vertices[0] + 0.5 * (vertices[i] - vertices[0]), box)
                        values[i] = ev.evaluate(_point(vertices[i])).accuracy
    except BudgetExhausted:
        pass
    return ev.best_so_far()


def _fit_quadratic(points: list[np.ndarray], values: list[float]) -> np.ndarray | None:
    """Interpolating quadratic w for [1, a, b, a^2, ab, b^2]; None if degenerate."""
    basis = np.array([[1.0, p[0], p[1], p[0] ** 2, p[0] * p[1], p[1] ** 2]
                      for p in points])
    # Scale columns so the rank test is meaningful across very different
    # coordinate magnitudes.
    norms = np.linalg.norm(basis, axis=0)
    norms[norms == 0.0] = 1.0
    scaled = basis / norms
    if np.linalg.matrix_rank(scaled, tol=1e-9) < 6:
        return None
    try:
        w = np.linalg.solve(basis, np.asarray(values))
    except np.linalg.LinAlgError:
        return None
    if not np.isfinite(w).all():
        return None
    return w


def _quadratic_value(w: np.ndarray, x: np.ndarray) -> float:
    a, b = x
    return float(w[0] + w[1] * a + w[2] * b + w[3] * a * a + w[4] * a * b + w[5] * b * b)


def _maximize_quadratic(w: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Exact maximizer of the quadratic over an axis-aligned rectangle."""
    candidates: list[np.ndarray] = []
    # Interior stationary point.
    h = np.array([[2.0 * w[3], w[4]], [w[4], 2.0 * w[5]]])
    g = -np.array([w[1], w[2]])
    det = h[0, 0] * h[1, 1] - h[0, 1] * h[1, 0]
    if abs(det) > 1e-14:
        stat = np.linalg.solve(h, g)
        if lo[0] <= stat[0] <= hi[0] and lo[1] <= stat[1] <= hi[1]:
            candidates.append(stat)
    # Edges: fix one coordinate, maximize the 1-D quadratic in the other.
    for a in (lo[0], hi[0]):
        candidates.append(np.array([a, lo[1]]))
        candidates.append(np.array([a, hi[1]]))
        if abs(w[5]) > 1e-14:
            b = -(w[2] + w[4] * a) / (2.0 * w[5])
            if lo[1] <= b <= hi[1]:
                candidates.append(np.array([a, b]))
    for b in (lo[1], hi[1]):
        if abs(w[3]) > 1e-14:
            a = -(w[1] + w[4] * b) / (2.0 * w[3])
            if lo[0] <= a <= hi[0]:
                candidates.append(np.array([a, b]))
    best = candidates[0]
    best_val = _quadratic_value(w, best)
    for cand in candidates[1:]:
        val = _quadratic_value(w, cand)
        if val > best_val:
            best, best_val = cand, val
    return best


def quad_trust_region(ev: SurfaceEvaluator, budget: int, seed: int) -> list[HyperPoint]:
    """Trust-region search on an interpolated full quadratic model.

    Maintains a 6-point interpolation set, proposes the exact maximizer of
    the fitted quadratic within the trust rectangle intersected with the
    box, and grows or shrinks the rectangle by the usual ratio tests. The
    first trust region spans the whole box, so on an exactly quadratic
    surface the first proposal is the box-constrained maximizer. Degenerate
    interpolation sets are re-seeded from a scaled stencil around the best
    point; a collapsed region triggers a random restart.
    """
    box = ev.box
    rng = np.random.default_rng(seed)
    spans = _spans(box)

    def stencil(center: np.ndarray, h: np.ndarray) -> list[np.ndarray]:
        offsets = [np.zeros(2), np.array([h[0], 0.0]), np.array([-h[0], 0.0]),
                   np.array([0.0, h[1]]), np.array([0.0, -h[1]]), h.copy()]
        return [_clip(center + off, box) for off in offsets]

    try:
        points = stencil(np.array([box.center.log2c, box.center.log2gamma]), spans / 10.0)
        values = [ev.evaluate(_point(p)).accuracy for p in points]
        delta = spans.copy()
        while True:
            if np.max(delta / spans) < 1e-4:
                points = stencil(_random_in_box(rng, box), spans / 10.0)
                values = [ev.evaluate(_point(p)).accuracy for p in points]
                delta = spans.copy()
                continue
            w = _fit_quadratic(points, values)
            if w is None:
                best_i = int(np.argmax(values))
                points = stencil(points[best_i], np.maximum(delta / 4.0, spans * 1e-5))
                values = [ev.evaluate(_point(p)).accuracy for p in points]
                continue
            best_i = int(np.argmax(values))
            center = points[best_i]
            lo = np.maximum(center - delta, _lo(box))
            hi = np.minimum(center + delta, _hi(box))
            proposal = _maximize_quadratic(w, lo, hi)
            predicted = _quadratic_value(w, proposal) - _quadratic_value(w, center)
            if predicted <= 1e-12:
                delta = delta / 2.0
                continue
            f_prop = ev.evaluate(_point(proposal)).accuracy
            ratio = (f_prop - values[best_i]) / predicted
            if ratio >= 0.75:
                delta = np.minimum(delta * 2.0, spans)
            elif ratio < 0.25:
                delta = delta / 2.0
            worst_i = int(np.argmin(values))
            points[worst_i] = proposal
            values[worst_i] = f_prop
    except BudgetExhausted:
        pass
    return ev.best_so_far()


def simulated_annealing(ev: SurfaceEvaluator, budget: int, seed: int) -> list[HyperPoint]:
    """Metropolis search with geometric cooling.

    The starting temperature is the standard deviation of a handful of
    bootstrap probes, the proposal is an isotropic-per-dimension Gaussian
    with sd one tenth of each box side, and temperature decays by 0.95 per
    step. At zero temperature only non-worsening moves are accepted.
    """
    box = ev.box
    rng = np.random.default_rng(seed)
    sigma = _spans(box) / 10.0
    try:
        n_probes = max(1, min(SA_PROBES, budget - 1))
        probes = []
        for _ in range(n_probes):
            x = _random_in_box(rng, box)
            probes.append((x, ev.evaluate(_point(x)).accuracy))
        t0 = max(float(np.std([v for _, v in probes])), 1e-12)
        current, current_val = max(probes, key=lambda pv: pv[1])
        step = 0
        while True:
            temp = t0 * (SA_COOLING ** step)
            proposal = _clip(current + rng.normal(0.0, sigma), box)
            value = ev.evaluate(_point(proposal)).accuracy
            delta = value - current_val
            accept = delta >= 0.0
            if not accept and temp > 1e-300:
                threshold = math.exp(delta / temp) if delta / temp > -700 else 0.0
                accept = rng.uniform() < threshold
            if accept:
                current, current_val = proposal, value
            step += 1
    except BudgetExhausted:
        pass
    return ev.best_so_far()


def particle_swarm(ev: SurfaceEvaluator, budget: int, seed: int) -> list[HyperPoint]:
    """Constriction-style particle swarm with boundary velocity zeroing.

    Uses 10 particles (5 when the budget is under 50) for floor(N / swarm)
    synchronous rounds, the first of which evaluates the seeded initial
    positions at zero velocity.
    """
    box = ev.box
    rng = np.random.default_rng(seed)
    swarm = 5 if budget < 50 else 10
    rounds = budget // swarm
    if rounds < 1:
        raise ValueError(f"budget {budget} cannot cover one round of {swarm} particles")

    positions = np.column_stack([
        rng.uniform(box.c_lo, box.c_hi, swarm),
        rng.uniform(box.g_lo, box.g_hi, swarm)])
    velocities = np.zeros((swarm, 2))
    lo, hi = _lo(box), _hi(box)

    try:
        values = np.array([ev.evaluate(_point(x)).accuracy for x in positions])
        pbest = positions.copy()
        pbest_val = values.copy()
        g_i = int(np.argmax(values))
        gbest, gbest_val = positions[g_i].copy(), float(values[g_i])
        for _ in range(rounds - 1):
            for k in range(swarm):
                r1 = rng.uniform(size=2)
                r2 = rng.uniform(size=2)
                velocities[k] = (PSO_OMEGA * velocities[k]
                                 + PSO_C1 * r1 * (pbest[k] - positions[k])
                                 + PSO_C2 * r2 * (gbest - positions[k]))
                moved = positions[k] + velocities[k]
                clipped = np.clip(moved, lo, hi)
                velocities[k][clipped != moved] = 0.0
                positions[k] = clipped
            for k in range(swarm):
                value = ev.evaluate(_point(positions[k])).accuracy
                if value > pbest_val[k]:
                    pbest[k] = positions[k].copy()
                    pbest_val[k] = value
                if value > gbest_val:
                    gbest = positions[k].copy()
                    gbest_val = value
    except BudgetExhausted:
        pass
    return ev.best_so_far()


def cma_es(ev: SurfaceEvaluator, budget: int, seed: int) -> list[HyperPoint]:
    """(mu, lambda) evolution strategy with covariance adaptation.

    Fixed population lambda=6 with mu=3 weighted recombination, mean
    started at the box center and step size at a quarter of the box
    diagonal. Consumes exactly lambda * floor(N / lambda) evaluations;
    candidates are clipped into the box and the clipped positions drive
    the mean, path, and covariance updates. The covariance is re-symmetrized
    and eigenvalue-floored every generation to keep it positive definite.
    """
    box = ev.box
    rng = np.random.default_rng(seed)
    lam, mu = 6, 3
    n = 2
    generations = budget // lam
    if generations < 1:
        raise ValueError(f"budget {budget} is below one generation of {lam}")

    raw_w = np.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    weights = raw_w / raw_w.sum()
    mu_eff = 1.0 / np.sum(weights ** 2)
    c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0)
    d_sigma = 1.0 + 2.0 * max(0.0, math.sqrt((mu_eff - 1.0) / (n + 1.0)) - 1.0) + c_sigma
    c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n)
    c_1 = 2.0 / ((n + 1.3) ** 2 + mu_eff)
    c_mu = min(1.0 - c_1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0) ** 2 + mu_eff))
    expected_norm = math.sqrt(2.0) * math.gamma((n + 1) / 2.0) / math.gamma(n / 2.0)

    mean = np.array([box.center.log2c, box.center.log2gamma])
    sigma = 0.25 * math.hypot(box.c_span, box.g_span)
    sigma_cap = 2.0 * math.hypot(box.c_span, box.g_span)
    cov = np.eye(n)
    p_sigma = np.zeros(n)
    p_c = np.zeros(n)
    eigvals, eigvecs = np.linalg.eigh(cov)

    try:
        for gen in range(generations):
            scale = eigvecs * np.sqrt(eigvals)
            z = rng.standard_normal((lam, n))
            xs = mean + sigma * z @ scale.T
            xs = np.clip(xs, _lo(box), _hi(box))
            values = np.array([ev.evaluate(_point(x)).accuracy for x in xs])
            order = np.argsort(-values, kind="stable")[:mu]
            ys = (xs[order] - mean) / sigma
            y_w = weights @ ys

            mean = mean + sigma * y_w
            inv_sqrt = eigvecs @ np.diag(1.0 / np.sqrt(eigvals)) @ eigvecs.T
            p_sigma = ((1.0 - c_sigma) * p_sigma
                       + math.sqrt(c_sigma * (2.0 - c_sigma) * mu_eff) * inv_sqrt @ y_w)
            ps_norm = float(np.linalg.norm(p_sigma))
            normalizer = math.sqrt(1.0 - (1.0 - c_sigma) ** (2 * (gen + 1)))
            h_sigma = 1.0 if ps_norm / normalizer < (1.4 + 2.0 / (n + 1)) * expected_norm else 0.0
            p_c = ((1.0 - c_c) * p_c
                   + h_sigma * math.sqrt(c_c * (2.0 - c_c) * mu_eff) * y_w)
            rank_mu = sum(w * np.outer(yv, yv) for w, yv in zip(weights, ys))
            cov = ((1.0 - c_1 - c_mu) * cov
                   + c_1 * (np.outer(p_c, p_c) + (1.0 - h_sigma) * c_c * (2.0 - c_c) * cov)
                   + c_mu * rank_mu)
            sigma = min(sigma * math.exp((c_sigma / d_sigma) * (ps_norm / expected_norm - 1.0)),
                        sigma_cap)

            cov = (cov + cov.T) / 2.0
            eigvals, eigvecs = np.linalg.eigh(cov)
            eigvals = np.maximum(eigvals, 1e-20)
            assert np.all(eigvals > 0.0), "covariance lost positive definiteness"
    except BudgetExhausted:
        pass
    return ev.best_so_far()
