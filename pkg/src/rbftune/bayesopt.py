"""Model-based search: Gaussian-process expected improvement and a
two-density quantile search.

Both optimizers follow the shared contract of optimizers.py: clip into the
box, stop on budget exhaustion, return the argmax of their own log, and
replay identically for identical (seed, surface) pairs.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import optimize
from scipy.linalg import solve_triangular
from scipy.special import logsumexp
from scipy.stats import norm

from .probes import rand_points, ud_points
from .space import HyperPoint, SearchBox
from .surface import BudgetExhausted, SurfaceEvaluator

GP_XI = 0.01
GP_JITTER = 1e-10
GP_JITTER_CAP = 1e-2
GP_REFIT_EVERY = 10
GP_SPARSE_REFIT_EVERY = 25
GP_DENSE_REFIT_LIMIT = 150
GP_FIT_CAP = 120
GP_LATTICE_SIDE = 40
GP_POLISH_STEPS = 10
TPE_GAMMA = 0.25
TPE_CANDIDATES = 24
TPE_BANDWIDTH_DIVISOR = 50.0


class SurrogateError(RuntimeError):
    """Raised when the GP covariance cannot be factorized."""


def _sq_dists(A: np.ndarray, B: np.ndarray, length_scales: np.ndarray) -> np.ndarray:
    """Sum over dimensions of ((a_d - b_d) / l_d)^2 for all row pairs."""
    out = np.zeros((A.shape[0], B.shape[0]))
    for d in range(A.shape[1]):
        diff = (A[:, d][:, None] - B[:, d][None, :]) / length_scales[d]
        out += diff * diff
    return out


def _tri_solve(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    return solve_triangular(L, b, lower=True, check_finite=False)


def _chol_solve(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    return solve_triangular(L.T, _tri_solve(L, b), lower=False, check_finite=False)


def _chol_with_jitter(K: np.ndarray) -> tuple[np.ndarray, float]:
    jitter = GP_JITTER
    n = K.shape[0]
    while True:
        try:
            return np.linalg.cholesky(K + jitter * np.eye(n)), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
            if jitter > GP_JITTER_CAP:
                raise SurrogateError("ill-conditioned surrogate") from None


class GpSurrogate:
    """GP with anisotropic squared-exponential kernel and constant mean.

    K(x, x') = sf^2 * exp(-0.5 * sum_d ((x_d - x'_d) / l_d)^2) + sn^2 [x = x']

    The mean is the empirical mean of the fitted targets. Factorization
    escalates jitter by factors of 10 up to a cap before giving up with
    SurrogateError.
    """

    def __init__(self, length_scales, signal_sd: float, noise_sd: float):
        self.length_scales = np.asarray(length_scales, dtype=np.float64)
        self.signal_sd = float(signal_sd)
        self.noise_sd = float(noise_sd)

    def _kernel(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        return self.signal_sd ** 2 * np.exp(-0.5 * _sq_dists(A, B, self.length_scales))

    def fit(self, X, y) -> "GpSurrogate":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        self._X = X
        self._mean = float(y.mean())
        K = self._kernel(X, X) + self.noise_sd ** 2 * np.eye(X.shape[0])
        self._chol, self._jitter = _chol_with_jitter(K)
        resid = y - self._mean
        self._alpha = _chol_solve(self._chol, resid)
        return self

    def predict(self, Xs) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and latent variance at query rows."""
        Xs = np.asarray(Xs, dtype=np.float64)
        k_star = self._kernel(Xs, self._X)
        mu = self._mean + k_star @ self._alpha
        v = _tri_solve(self._chol, k_star.T)
        var = np.maximum(self.signal_sd ** 2 - np.einsum("ij,ij->j", v, v), 0.0)
        return mu, var

    def expected_improvement(self, Xs, f_best: float, xi: float = GP_XI) -> np.ndarray:
        mu, var = self.predict(Xs)
        return expected_improvement(mu, var, f_best, xi)


def expected_improvement(mu: np.ndarray, var: np.ndarray, f_best: float,
                         xi: float = GP_XI) -> np.ndarray:
    """EI for maximization; exactly zero wherever the variance is zero."""
    mu = np.asarray(mu, dtype=np.float64)
    sd = np.sqrt(np.asarray(var, dtype=np.float64))
    out = np.zeros_like(mu, dtype=np.float64)
    positive = sd > 1e-12
    z = (mu[positive] - f_best - xi) / sd[positive]
    out[positive] = sd[positive] * (z * norm.cdf(z) + norm.pdf(z))
    return np.maximum(out, 0.0)


def _lml_and_grad(theta: np.ndarray, X: np.ndarray, resid: np.ndarray):
    """Negative log marginal likelihood and its gradient in log-parameters."""
    n = X.shape[0]
    length_scales = np.exp(theta[:2])
    sf2 = math.exp(2.0 * theta[2])
    sn2 = math.exp(2.0 * theta[3])
    sq = _sq_dists(X, X, length_scales)
    Kf = sf2 * np.exp(-0.5 * sq)
    K = Kf + sn2 * np.eye(n)
    try:
        L, _ = _chol_with_jitter(K)
    except SurrogateError:
        return 1e25, np.zeros(4)
    alpha = _chol_solve(L, resid)
    lml = (-0.5 * float(resid @ alpha)
           - float(np.log(np.diag(L)).sum())
           - 0.5 * n * math.log(2.0 * math.pi))
    K_inv = _chol_solve(L, np.eye(n))
    G = np.outer(alpha, alpha) - K_inv
    grads = np.empty(4)
    for d in range(2):
        diff = (X[:, d][:, None] - X[:, d][None, :]) / length_scales[d]
        grads[d] = 0.5 * np.sum(G * (Kf * diff * diff))
    grads[2] = 0.5 * np.sum(G * (2.0 * Kf))
    grads[3] = 0.5 * np.trace(G) * 2.0 * sn2
    return -lml, -grads


def fit_gp_ml(X, y, seed: int = 0, n_restarts: int = 2,
              noise_floor: float = 1e-8,
              warm_start: GpSurrogate | None = None,
              maxiter: int = 40) -> GpSurrogate:
    """Fit GP hyperparameters by marginal-likelihood ascent with restarts."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    resid = y - y.mean()
    spans = X.max(axis=0) - X.min(axis=0)
    spans = np.where(spans <= 0.0, 1.0, spans)
    y_sd = max(float(resid.std()), 1e-4)
    bounds = [(math.log(1e-2), math.log(1e3)),
              (math.log(1e-2), math.log(1e3)),
              (math.log(1e-4), math.log(1e1)),
              (math.log(max(noise_floor, 1e-12)), math.log(1.0))]

    starts = [np.array([math.log(spans[0] / 4.0), math.log(spans[1] / 4.0),
                        math.log(y_sd), math.log(max(y_sd / 100.0, noise_floor * 10.0))])]
    if warm_start is not None:
        starts.insert(0, np.array([
            math.log(warm_start.length_scales[0]), math.log(warm_start.length_scales[1]),
            math.log(max(warm_start.signal_sd, 1e-4)),
            math.log(max(warm_start.noise_sd, noise_floor))]))
    rng = np.random.default_rng(seed)
    for _ in range(n_restarts):
        starts.append(starts[-1] + rng.normal(0.0, 0.5, size=4))

    best_theta, best_obj = None, math.inf
    for start in starts:
        start = np.clip(start, [b[0] for b in bounds], [b[1] for b in bounds])
        res = optimize.minimize(_lml_and_grad, start, args=(X, resid), jac=True,
                                method="L-BFGS-B", bounds=bounds,
                                options={"maxiter": maxiter, "ftol": 1e-8})
        if res.fun < best_obj:
            best_obj, best_theta = res.fun, res.x
    surrogate = GpSurrogate(np.exp(best_theta[:2]),
                            math.exp(best_theta[2]), math.exp(best_theta[3]))
    return surrogate.fit(X, y)


class _LatticeGp:
    """Exact GP conditioned on all observations with an incrementally
    maintained Cholesky factor and lattice solve, so per-iteration cost is
    O(n * lattice) instead of O(n^2 * lattice)."""

    def __init__(self, params: GpSurrogate, X: np.ndarray, y: np.ndarray,
                 lattice: np.ndarray):
        self.ls = params.length_scales
        self.sf2 = params.signal_sd ** 2
        self.sn2 = params.noise_sd ** 2
        self.lattice = lattice
        self.X = np.asarray(X, dtype=np.float64).copy()
        self.y = list(np.asarray(y, dtype=np.float64))
        K = self._kernel(self.X, self.X) + self.sn2 * np.eye(self.X.shape[0])
        self.L, self.jitter = _chol_with_jitter(K)
        self.V = _tri_solve(self.L, self._kernel(self.X, lattice))
        self._refresh_beta()

    def _kernel(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        return self.sf2 * np.exp(-0.5 * _sq_dists(A, B, self.ls))

    def _refresh_beta(self) -> None:
        ys = np.asarray(self.y)
        self.mean = float(ys.mean())
        self.beta = _tri_solve(self.L, ys - self.mean)

    def append(self, x: np.ndarray, value: float) -> None:
        n = self.X.shape[0]
        k_vec = self._kernel(self.X, x[None, :])[:, 0]
        w = _tri_solve(self.L, k_vec)
        d2 = self.sf2 + self.sn2 + self.jitter - float(w @ w)
        d = math.sqrt(max(d2, 1e-12))
        grown = np.zeros((n + 1, n + 1))
        grown[:n, :n] = self.L
        grown[n, :n] = w
        grown[n, n] = d
        self.L = grown
        v_new = (self._kernel(x[None, :], self.lattice)[0] - w @ self.V) / d
        self.V = np.vstack([self.V, v_new])
        self.X = np.vstack([self.X, x])
        self.y.append(float(value))
        self._refresh_beta()

    def lattice_mu_var(self) -> tuple[np.ndarray, np.ndarray]:
        mu = self.mean + self.V.T @ self.beta
        var = np.maximum(self.sf2 - np.einsum("ij,ij->j", self.V, self.V), 0.0)
        return mu, var

    def predict(self, P: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        kp = self._kernel(self.X, np.atleast_2d(P))
        W = _tri_solve(self.L, kp)
        mu = self.mean + W.T @ self.beta
        var = np.maximum(self.sf2 - np.einsum("ij,ij->j", W, W), 0.0)
        return mu, var


def gp_bayes_opt(ev: SurfaceEvaluator, budget: int, seed: int, *,
                 lattice_side: int = GP_LATTICE_SIDE,
                 polish_steps: int = GP_POLISH_STEPS,
                 refit_every: int = GP_REFIT_EVERY,
                 xi: float = GP_XI) -> list[HyperPoint]:
    """GP expected-improvement search after a uniform-design warmup.

    The initial design has max(5, N // 10) points. Each iteration scores EI
    over a lattice of box points, polishes the winner with a short compass
    search, and spends one evaluation there. Hyperparameters are refit by
    marginal-likelihood ascent every refit_every observations (every 25 once
    the history exceeds 150 points, fitting on a strided subset); in between,
    the posterior is updated exactly and incrementally. When the maximal EI
    underflows, meaning the surrogate
    sees nothing left to learn, the proposal falls back to the posterior
    mean maximizer so late evaluations exploit rather than wander.
    """
    box = ev.box
    init_n = max(5, budget // 10)
    if budget < init_n + 1:
        raise ValueError(f"budget {budget} cannot cover the initial design")

    lo = np.array([box.c_lo, box.g_lo])
    hi = np.array([box.c_hi, box.g_hi])
    cs = np.linspace(box.c_lo, box.c_hi, lattice_side)
    gs = np.linspace(box.g_lo, box.g_hi, lattice_side)
    lattice = np.array([[c, g] for c in cs for g in gs])
    spacing = np.array([cs[1] - cs[0], gs[1] - gs[0]])

    X: list[np.ndarray] = []
    y: list[float] = []

    def observe(x: np.ndarray) -> tuple[np.ndarray, float]:
        e = ev.evaluate(HyperPoint(float(x[0]), float(x[1])))
        row = np.array([e.point.log2c, e.point.log2gamma])
        X.append(row)
        y.append(e.accuracy)
        return row, e.accuracy

    params: GpSurrogate | None = None
    state: _LatticeGp | None = None
    since_refit = 0
    try:
        for p in ud_points(init_n, box).points:
            observe(np.array([p.log2c, p.log2gamma]))
        while True:
            cadence = (refit_every if len(X) <= GP_DENSE_REFIT_LIMIT
                       else max(refit_every, GP_SPARSE_REFIT_EVERY))
            if state is None or since_refit >= cadence:
                xs = np.array(X)
                ys = np.array(y)
                if xs.shape[0] > GP_FIT_CAP:
                    idx = np.unique(np.linspace(0, xs.shape[0] - 1, GP_FIT_CAP).astype(int))
                    fit_x, fit_y = xs[idx], ys[idx]
                else:
                    fit_x, fit_y = xs, ys
                params = fit_gp_ml(fit_x, fit_y, seed=seed,
                                   n_restarts=2 if state is None else 0,
                                   warm_start=params,
                                   maxiter=40 if state is None else 15)
                state = _LatticeGp(params, xs, ys, lattice)
                since_refit = 0
            f_best = max(y)
            mu, var = state.lattice_mu_var()
            ei = expected_improvement(mu, var, f_best, xi)
            exploit = float(np.max(ei)) <= 1e-12

            def score(P: np.ndarray) -> np.ndarray:
                p_mu, p_var = state.predict(P)
                if exploit:
                    return p_mu
                return expected_improvement(p_mu, p_var, f_best, xi)

            base = mu if exploit else ei
            candidate = lattice[int(np.argmax(base))].copy()
            best_score = float(np.max(base))
            step = spacing / 2.0
            for _ in range(polish_steps):
                neighbors = np.clip(np.array([
                    candidate + [step[0], 0.0], candidate - [step[0], 0.0],
                    candidate + [0.0, step[1]], candidate - [0.0, step[1]]]), lo, hi)
                n_scores = score(neighbors)
                k = int(np.argmax(n_scores))
                if n_scores[k] > best_score:
                    candidate = neighbors[k]
                    best_score = float(n_scores[k])
                else:
                    step = step / 2.0
            row, value = observe(candidate)
            state.append(row, value)
            since_refit += 1
    except BudgetExhausted:
        pass
    return ev.best_so_far()


class TpeDensity:
    """Mixture of axis-aligned Gaussians, one per observation.

    Each component's bandwidth is the Euclidean distance to its nearest
    neighbor in the same observation set, floored per dimension at
    side / 50; a lone observation uses the floor itself.
    """

    def __init__(self, points: np.ndarray, box: SearchBox):
        self.points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        self.box = box
        floor = np.array([box.c_span, box.g_span]) / TPE_BANDWIDTH_DIVISOR
        m = self.points.shape[0]
        if m == 1:
            nn = np.zeros(1)
        else:
            deltas = self.points[:, None, :] - self.points[None, :, :]
            dists = np.sqrt(np.einsum("ijk,ijk->ij", deltas, deltas))
            np.fill_diagonal(dists, np.inf)
            nn = dists.min(axis=1)
        self.bandwidths = np.maximum(nn[:, None], floor[None, :])

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        idx = rng.integers(0, self.points.shape[0], size=n)
        draws = self.points[idx] + rng.standard_normal((n, 2)) * self.bandwidths[idx]
        lo = np.array([self.box.c_lo, self.box.g_lo])
        hi = np.array([self.box.c_hi, self.box.g_hi])
        return np.clip(draws, lo, hi)

    def log_pdf(self, xs: np.ndarray) -> np.ndarray:
        xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
        z = (xs[:, None, :] - self.points[None, :, :]) / self.bandwidths[None, :, :]
        comp = (-0.5 * np.einsum("ijk,ijk->ij", z, z)
                - np.log(self.bandwidths).sum(axis=1)[None, :]
                - math.log(2.0 * math.pi))
        return logsumexp(comp, axis=1) - math.log(self.points.shape[0])


def tpe_split(n_obs: int, gamma_q: float = TPE_GAMMA) -> int:
    """Number of observations assigned to the good set."""
    return int(math.ceil(gamma_q * n_obs))


def tpe_search(ev: SurfaceEvaluator, budget: int, seed: int, *,
               gamma_q: float = TPE_GAMMA,
               n_candidates: int = TPE_CANDIDATES) -> list[HyperPoint]:
    """Two-density search: split observations at the gamma quantile, model
    good and bad sets with kernel densities, and evaluate the candidate
    maximizing the density ratio l(x) / g(x) among seeded draws from l.
    """
    box = ev.box
    rng = np.random.default_rng(seed)
    init_n = max(10, budget // 10)
    if budget < init_n + 1:
        raise ValueError(f"budget {budget} cannot cover the initial design")

    X: list[np.ndarray] = []
    y: list[float] = []

    def observe(point: HyperPoint) -> None:
        e = ev.evaluate(point)
        X.append(np.array([e.point.log2c, e.point.log2gamma]))
        y.append(e.accuracy)

    try:
        for p in rand_points(init_n, seed, box).points:
            observe(p)
        while True:
            n_obs = len(y)
            order = sorted(range(n_obs), key=lambda i: (-y[i], i))
            n_good = tpe_split(n_obs, gamma_q)
            good = TpeDensity(np.array([X[i] for i in order[:n_good]]), box)
            bad = TpeDensity(np.array([X[i] for i in order[n_good:]]), box)
            candidates = good.sample(rng, n_candidates)
            scores = good.log_pdf(candidates) - bad.log_pdf(candidates)
            observe(HyperPoint(*map(float, candidates[int(np.argmax(scores))])))
    except BudgetExhausted:
        pass
    return ev.best_so_far()
