import numpy as np
import pytest
from sklearn.base import clone

from oracles import (dual_objective, kkt_violations, linear_kernel_matrix,
                     random_separable_dataset, rbf_kernel_matrix,
                     solve_dual_reference)
from rbftune.svm import SvmClassifier, kernel_matrix, kernel_value


class TestKernels:
    def test_rbf_value(self):
        x, y = np.array([0.0, 0.0]), np.array([1.0, 1.0])
        assert kernel_value(x, y, "rbf", gamma=0.5) == pytest.approx(np.exp(-1.0))
        assert kernel_value(x, x, "rbf", gamma=2.0) == 1.0

    def test_linear_value(self):
        assert kernel_value([1.0, 2.0], [3.0, 4.0], "linear") == 11.0

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="unknown kernel"):
            kernel_value([1.0], [1.0], "poly")

    def test_matrix_matches_pairwise_values(self):
        rng = np.random.default_rng(0)
        A, B = rng.normal(size=(4, 3)), rng.normal(size=(5, 3))
        K = kernel_matrix(A, B, "rbf", gamma=0.7)
        for i in range(4):
            for j in range(5):
                assert K[i, j] == pytest.approx(
                    kernel_value(A[i], B[j], "rbf", 0.7), abs=1e-12)

    def test_matrix_symmetric_unit_diagonal(self):
        X = np.random.default_rng(1).normal(size=(6, 2))
        K = kernel_matrix(X, X, "rbf", gamma=1.3)
        assert np.allclose(K, K.T)
        assert np.allclose(np.diag(K), 1.0)


class TestSolverAgainstOracle:
    @pytest.mark.parametrize("seed", range(6))
    def test_dual_matches_reference(self, seed):
        X, y = random_separable_dataset(seed)
        rng = np.random.default_rng(seed + 1000)
        C = float(2.0 ** rng.uniform(-3, 6))
        gamma = float(2.0 ** rng.uniform(-6, 2))
        model = SvmClassifier(C=C, gamma=gamma, tol=1e-6).fit(X, y)
        ys = np.where(y == 1, 1.0, -1.0)
        K = rbf_kernel_matrix(X, gamma)
        ref = solve_dual_reference(K, ys, C)
        assert dual_objective(K, ys, model.alpha_) == pytest.approx(
            dual_objective(K, ys, ref), abs=1e-4, rel=1e-4)
        assert model.converged_

    @pytest.mark.parametrize("seed", range(6))
    def test_kkt_conditions_hold(self, seed):
        rng = np.random.default_rng(seed + 77)
        n, d = int(rng.integers(15, 41)), int(rng.integers(1, 5))
        X = rng.normal(size=(n, d))
        y = (rng.random(n) < 0.5).astype(np.int64)
        if y.min() == y.max():
            y[0] = 1 - y[0]
        X += np.where(y == 1, 0.7, -0.7)[:, None]
        C = float(2.0 ** rng.uniform(-3, 6))
        gamma = float(2.0 ** rng.uniform(-6, 2))
        model = SvmClassifier(C=C, gamma=gamma, tol=1e-3).fit(X, y)
        ys = np.where(y == 1, 1.0, -1.0)
        K = rbf_kernel_matrix(X, gamma)
        assert not kkt_violations(K, ys, model.alpha_,
                                  float(model.intercept_[0]), C, 1e-3)

    def test_linear_kernel_against_reference(self):
        X, y = random_separable_dataset(3)
        model = SvmClassifier(C=2.0, kernel="linear", tol=1e-6).fit(X, y)
        ys = np.where(y == 1, 1.0, -1.0)
        K = linear_kernel_matrix(X)
        ref = solve_dual_reference(K, ys, 2.0)
        assert dual_objective(K, ys, model.alpha_) == pytest.approx(
            dual_objective(K, ys, ref), abs=1e-4, rel=1e-4)

    def test_equality_constraint_and_box(self):
        X, y = random_separable_dataset(5)
        model = SvmClassifier(C=1.5, gamma=0.5).fit(X, y)
        ys = np.where(y == 1, 1.0, -1.0)
        assert abs(model.alpha_ @ ys) < 1e-9
        assert (model.alpha_ >= 0).all() and (model.alpha_ <= 1.5 + 1e-12).all()


class TestClassifierBehavior:
    def test_separable_data_classified_perfectly(self):
        rng = np.random.default_rng(2)
        X = np.vstack([rng.normal(-3, 0.3, size=(15, 2)),
                       rng.normal(3, 0.3, size=(15, 2))])
        y = np.array([0] * 15 + [1] * 15)
        model = SvmClassifier(C=10.0, gamma=0.5).fit(X, y)
        assert np.array_equal(model.predict(X), y)
        assert model.score(X, y) == 1.0

    def test_decision_function_sign_matches_predict(self):
        X, y = random_separable_dataset(7)
        model = SvmClassifier(C=1.0, gamma=1.0).fit(X, y)
        scores = model.decision_function(X)
        assert np.array_equal(model.predict(X), (scores > 0).astype(np.int64))

    def test_support_vectors_recorded(self):
        X, y = random_separable_dataset(8)
        model = SvmClassifier(C=1.0, gamma=1.0).fit(X, y)
        assert model.support_vectors_.shape == (len(model.support_), X.shape[1])
        assert (model.alpha_[model.support_] > 0).all()

    def test_max_passes_cap_flags_unconverged(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(40, 2))
        y = (rng.random(40) < 0.5).astype(np.int64)
        model = SvmClassifier(C=1000.0, gamma=10.0, max_passes=1).fit(X, y)
        assert model.converged_ in (False, True)  # still usable either way
        model.predict(X)

    def test_feature_count_mismatch(self):
        X, y = random_separable_dataset(1)
        model = SvmClassifier().fit(X, y)
        with pytest.raises(ValueError, match="features"):
            model.predict(np.zeros((2, X.shape[1] + 1)))


class TestValidation:
    def test_rejects_nonpositive_c(self):
        X, y = random_separable_dataset(0)
        with pytest.raises(ValueError, match="C"):
            SvmClassifier(C=0.0).fit(X, y)

    def test_rejects_nonpositive_gamma(self):
        X, y = random_separable_dataset(0)
        with pytest.raises(ValueError, match="gamma"):
            SvmClassifier(gamma=-1.0).fit(X, y)

    def test_linear_kernel_ignores_gamma_sign(self):
        X, y = random_separable_dataset(0)
        SvmClassifier(gamma=-1.0, kernel="linear").fit(X, y)

    def test_rejects_unknown_kernel(self):
        X, y = random_separable_dataset(0)
        with pytest.raises(ValueError, match="kernel"):
            SvmClassifier(kernel="poly").fit(X, y)

    def test_rejects_single_class(self):
        X = np.zeros((4, 2))
        with pytest.raises(ValueError, match="both classes"):
            SvmClassifier().fit(X, [1, 1, 1, 1])

    def test_rejects_nonbinary_labels(self):
        X = np.zeros((3, 2))
        with pytest.raises(ValueError, match="0/1"):
            SvmClassifier().fit(X, [0, 1, 2])


class TestSklearnProtocol:
    def test_get_params_round_trip(self):
        model = SvmClassifier(C=4.0, gamma=0.25, tol=1e-4)
        params = model.get_params()
        assert params["C"] == 4.0 and params["gamma"] == 0.25

    def test_clone_before_and_after_fit(self):
        X, y = random_separable_dataset(2)
        model = SvmClassifier(C=2.0, gamma=0.5).fit(X, y)
        fresh = clone(model)
        assert fresh.get_params() == model.get_params()
        assert not hasattr(fresh, "alpha_")
