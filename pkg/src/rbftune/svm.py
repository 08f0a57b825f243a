"""Binary kernel SVM trained with sequential minimal optimization.

The solver works on the dual problem

    min 0.5 * sum_ij y_i a_i y_j a_j K(x_i, x_j) - sum_i a_i
    s.t. sum_i y_i a_i = 0,  0 <= a_i <= C

selecting two-variable working sets by maximal KKT violation: the first
index maximizes the optimality score over the "up" set, the second
maximizes |E_i - E_j| over the "down" set. Kernel rows are fully cached
for n <= 5000 and computed on demand above that.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .validation import check_binary_labels, check_features, check_positive

FULL_CACHE_LIMIT = 5000
HARD_UPDATE_CAP = 1_000_000


def kernel_value(x, y, kind: str = "rbf", gamma: float = 1.0) -> float:
    """Kernel between two single vectors."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if kind == "linear":
        return float(np.dot(x, y))
    if kind == "rbf":
        diff = x - y
        return float(np.exp(-gamma * np.dot(diff, diff)))
    raise ValueError(f"unknown kernel kind {kind!r}")


def kernel_matrix(A, B, kind: str = "rbf", gamma: float = 1.0) -> np.ndarray:
    """Kernel between every row of A and every row of B.

    The RBF branch computes squared distances from explicit differences
    rather than the dot-product expansion; it is slightly slower but keeps
    small distances accurate.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if kind == "linear":
        return A @ B.T
    if kind == "rbf":
        out = np.empty((A.shape[0], B.shape[0]))
        for i in range(A.shape[0]):
            diff = B - A[i]
            out[i] = np.exp(-gamma * np.einsum("ij,ij->i", diff, diff))
        return out
    raise ValueError(f"unknown kernel kind {kind!r}")


class _KernelRows:
    """Row-wise kernel access with caching appropriate to the problem size."""

    def __init__(self, X: np.ndarray, kind: str, gamma: float):
        self.X = X
        self.kind = kind
        self.gamma = gamma
        n = X.shape[0]
        if n <= FULL_CACHE_LIMIT:
            self._full = kernel_matrix(X, X, kind, gamma)
            self._cache = None
        else:
            self._full = None
            self._cache: dict[int, np.ndarray] = {}

    def row(self, i: int) -> np.ndarray:
        if self._full is not None:
            return self._full[i]
        cached = self._cache.get(i)
        if cached is None:
            cached = kernel_matrix(self.X[i:i + 1], self.X, self.kind, self.gamma)[0]
            self._cache[i] = cached
        return cached

    def diag(self) -> np.ndarray:
        if self._full is not None:
            return np.diag(self._full).copy()
        if self.kind == "rbf":
            return np.ones(self.X.shape[0])
        return np.einsum("ij,ij->i", self.X, self.X)


def solve_smo(kernel_rows: _KernelRows, y: np.ndarray, C: float,
              tol: float = 1e-3, max_passes: int | None = None):
    """Run SMO on signed labels y in {-1, +1}.

    Returns (alpha, bias, converged, n_updates). ``max_passes`` counts
    selection sweeps of up to n pair updates each; the total number of pair
    updates is additionally capped at 1e6. Hitting either cap returns the
    current iterate with converged=False.
    """
    n = y.shape[0]
    if max_passes is None:
        max_passes = 10 * n
    update_cap = min(max_passes * n, HARD_UPDATE_CAP)

    alpha = np.zeros(n)
    u = np.zeros(n)  # u_i = sum_j y_j a_j K_ij, decision values without bias
    diag = kernel_rows.diag()
    yf = y.astype(np.float64)
    updates = 0
    converged = False

    while True:
        neg_e = yf - u
        up_mask = ((alpha < C) & (y == 1)) | ((alpha > 0) & (y == -1))
        lo_mask = ((alpha < C) & (y == -1)) | ((alpha > 0) & (y == 1))
        if not up_mask.any() or not lo_mask.any():
            converged = True
            break
        i = int(np.argmax(np.where(up_mask, neg_e, -np.inf)))
        j = int(np.argmin(np.where(lo_mask, neg_e, np.inf)))
        if neg_e[i] - neg_e[j] <= tol:
            converged = True
            break
        if updates >= update_cap:
            break

        yi, yj = yf[i], yf[j]
        ai_old, aj_old = alpha[i], alpha[j]
        s = yi * yj
        if s < 0:
            lo = max(0.0, aj_old - ai_old)
            hi = min(C, C + aj_old - ai_old)
        else:
            lo = max(0.0, ai_old + aj_old - C)
            hi = min(C, ai_old + aj_old)
        if hi - lo <= 1e-14:
            break

        row_i = kernel_rows.row(i)
        row_j = kernel_rows.row(j)
        e_i = u[i] - yi
        e_j = u[j] - yj
        eta = diag[i] + diag[j] - 2.0 * row_i[j]
        if eta > 1e-15:
            aj_new = aj_old + yj * (e_i - e_j) / eta
            aj_new = min(max(aj_new, lo), hi)
        else:
            # Flat direction: compare the dual objective at both ends.
            f1 = yi * e_i - ai_old * diag[i] - s * aj_old * row_i[j]
            f2 = yj * e_j - s * ai_old * row_i[j] - aj_old * diag[j]
            l1 = ai_old + s * (aj_old - lo)
            h1 = ai_old + s * (aj_old - hi)
            psi_lo = (l1 * f1 + lo * f2 + 0.5 * l1 * l1 * diag[i]
                      + 0.5 * lo * lo * diag[j] + s * lo * l1 * row_i[j])
            psi_hi = (h1 * f1 + hi * f2 + 0.5 * h1 * h1 * diag[i]
                      + 0.5 * hi * hi * diag[j] + s * hi * h1 * row_i[j])
            if psi_lo < psi_hi - 1e-12:
                aj_new = lo
            elif psi_lo > psi_hi + 1e-12:
                aj_new = hi
            else:
                break
        # Land exactly on the box when roundoff leaves a stray residue;
        # otherwise the residue coordinate stays in the working-set masks
        # and the maximal-violation pair can stall at a 1e-16 step.
        snap = 1e-12 * (1.0 + C)
        if aj_new < snap:
            aj_new = 0.0
        elif aj_new > C - snap:
            aj_new = C
        if abs(aj_new - aj_old) < 1e-14:
            break
        ai_new = ai_old + s * (aj_old - aj_new)
        if ai_new < snap:
            ai_new = 0.0
        elif ai_new > C - snap:
            ai_new = C
        ai_new = min(max(ai_new, 0.0), C)
        u += yi * (ai_new - ai_old) * row_i + yj * (aj_new - aj_old) * row_j
        alpha[i] = ai_new
        alpha[j] = aj_new
        updates += 1

    neg_e = yf - u
    up_mask = ((alpha < C) & (y == 1)) | ((alpha > 0) & (y == -1))
    lo_mask = ((alpha < C) & (y == -1)) | ((alpha > 0) & (y == 1))
    m = np.max(neg_e[up_mask]) if up_mask.any() else np.min(neg_e[lo_mask])
    big_m = np.min(neg_e[lo_mask]) if lo_mask.any() else np.max(neg_e[up_mask])
    bias = float((m + big_m) / 2.0)
    return alpha, bias, converged, updates


def dual_objective(K: np.ndarray, y: np.ndarray, alpha: np.ndarray) -> float:
    """Value of the dual objective being minimized."""
    v = y.astype(np.float64) * alpha
    return float(0.5 * v @ K @ v - alpha.sum())


class SvmClassifier(BaseEstimator, ClassifierMixin):
    """Binary SVM with an RBF or linear kernel, trained by SMO.

    Parameters
    ----------
    C : float
        Box constraint on the dual coefficients.
    gamma : float
        RBF kernel width; ignored for the linear kernel.
    kernel : str
        "rbf" or "linear".
    tol : float
        KKT violation tolerance for the stopping rule.
    max_passes : int or None
        Cap on selection sweeps; None means 10 * n_samples. Models that
        stop on the cap are returned with ``converged_ = False`` and still
        predict; slow corners of the hyperparameter box are expected.
    """

    def __init__(self, C: float = 1.0, gamma: float = 1.0, kernel: str = "rbf",
                 tol: float = 1e-3, max_passes: int | None = None):
        self.C = C
        self.gamma = gamma
        self.kernel = kernel
        self.tol = tol
        self.max_passes = max_passes

    def fit(self, X, y):
        X = check_features(X)
        y = check_binary_labels(y, X.shape[0])
        check_positive(self.C, "C")
        if self.kernel == "rbf":
            check_positive(self.gamma, "gamma")
        elif self.kernel != "linear":
            raise ValueError(f"unknown kernel kind {self.kernel!r}")

        signed = np.where(y == 1, 1, -1).astype(np.int64)
        rows = _KernelRows(X, self.kernel, self.gamma)
        alpha, bias, converged, n_updates = solve_smo(
            rows, signed, float(self.C), tol=self.tol, max_passes=self.max_passes)

        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        self.alpha_ = alpha
        support = np.flatnonzero(alpha > 0)
        self.support_ = support
        self.support_vectors_ = X[support]
        self.dual_coef_ = (signed[support] * alpha[support]).reshape(1, -1)
        self.intercept_ = np.array([bias])
        self.converged_ = converged
        self.n_updates_ = n_updates
        return self

    def decision_function(self, X) -> np.ndarray:
        X = check_features(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        if self.support_.size == 0:
            return np.full(X.shape[0], self.intercept_[0])
        K = kernel_matrix(X, self.support_vectors_, self.kernel, self.gamma)
        return K @ self.dual_coef_[0] + self.intercept_[0]

    def predict(self, X) -> np.ndarray:
        # Ties at exactly zero go to class 0.
        return np.where(self.decision_function(X) > 0,
                        self.classes_[1], self.classes_[0])
