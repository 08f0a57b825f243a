"""One-stop estimator that tunes (C, gamma) and refits on the full data.

SvmTuner wraps the whole pipeline behind the usual fit/predict surface:
pick a searcher from the registry by name, run it against the 5-fold
cross-validation accuracy surface of the training data, break ties with
a selection rule, then train a final SvmClassifier at the chosen point.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .data import fold_assignment
from .registry import SearchTask, get_searcher
from .selection import select
from .space import DEFAULT_BOX, SearchBox
from .svm import SvmClassifier
from .validation import check_binary_labels, check_features


class SvmTuner(BaseEstimator, ClassifierMixin):
    """Tune an RBF SVM over the (log2 C, log2 gamma) box, then refit.

    Parameters
    ----------
    algorithm : str
        Registry name of the searcher, e.g. "ud100", "grid400", "sigest10".
    selection_rule : str
        How to break ties among equally good points; see rbftune.selection.
    k_inner : int
        Number of cross-validation folds for the tuning surface.
    seed : int
        Drives the searcher's random choices and the randCg rule.
    fold_seed : int or None
        Separate seed for the fold assignment; defaults to ``seed``.
    box : SearchBox
        Rectangle of candidate exponents.
    tol, max_passes
        Passed through to every underlying SvmClassifier.

    Attributes (after fit)
    ----------------------
    best_point_ : HyperPoint       selected (log2 C, log2 gamma)
    best_score_ : float            cross-validation accuracy at the tie set
    tie_set_ : TieSet              all points reaching best_score_
    n_evaluations_ : int           surface evaluations consumed
    eval_log_ : tuple[Evaluation]  every probe in evaluation order
    classifier_ : SvmClassifier    final model trained on all rows
    C_, gamma_ : float             parameters of the final model
    """

    def __init__(self, algorithm: str = "ud100",
                 selection_rule: str = "randCg", k_inner: int = 5,
                 seed: int = 0, fold_seed: int | None = None,
                 box: SearchBox = DEFAULT_BOX, tol: float = 1e-3,
                 max_passes: int | None = None):
        self.algorithm = algorithm
        self.selection_rule = selection_rule
        self.k_inner = k_inner
        self.seed = seed
        self.fold_seed = fold_seed
        self.box = box
        self.tol = tol
        self.max_passes = max_passes

    def fit(self, X, y):
        X = check_features(X)
        y = check_binary_labels(y, X.shape[0])
        spec = get_searcher(self.algorithm)
        fold_seed = self.seed if self.fold_seed is None else self.fold_seed
        fold_of = fold_assignment(y, self.k_inner, fold_seed)
        task = SearchTask(X, y, fold_of, self.seed, box=self.box,
                          tol=self.tol, max_passes=self.max_passes)
        result = spec.runner(task)
        self.tie_set_ = result.tie_set
        self.best_point_ = select(result.tie_set, self.selection_rule,
                                  self.seed)
        self.best_score_ = result.tie_value
        self.n_evaluations_ = result.eval_count
        self.eval_log_ = tuple(result.log)
        self.C_ = self.best_point_.c
        self.gamma_ = self.best_point_.gamma
        self.classifier_ = SvmClassifier(
            C=self.C_, gamma=self.gamma_, tol=self.tol,
            max_passes=self.max_passes).fit(X, y)
        self.classes_ = self.classifier_.classes_
        self.n_features_in_ = self.classifier_.n_features_in_
        return self

    def decision_function(self, X) -> np.ndarray:
        return self.classifier_.decision_function(X)

    def predict(self, X) -> np.ndarray:
        return self.classifier_.predict(X)
