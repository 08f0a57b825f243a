"""Budgeted, cached evaluation of the cross-validated accuracy surface.

Every searcher sees the tuning problem only through a SurfaceEvaluator:
``evaluate`` clamps the requested point into the search box, measures mean
k-fold accuracy at it (or serves the value from cache), appends to an
append-only evaluation log, and always decrements the budget by one, cache
hit or not. Searchers treat the budget-exhausted error as a stop signal.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .space import DEFAULT_BOX, HyperPoint, SearchBox
from .svm import SvmClassifier


class BudgetExhausted(RuntimeError):
    """Raised when evaluate() is called with no budget remaining."""


class TimeLimitExceeded(RuntimeError):
    """Raised when evaluate() is called past the evaluator's deadline."""


@dataclass(frozen=True)
class Evaluation:
    point: HyperPoint
    accuracy: float
    seq: int

    def to_json_dict(self) -> dict:
        d = self.point.to_json_dict()
        d["accuracy"] = self.accuracy
        d["seq"] = self.seq
        return d


class SurfaceEvaluator:
    """Measure an objective over the box under a hard evaluation budget."""

    def __init__(self, objective: Callable[[HyperPoint], float], budget: int,
                 seed: int = 0, box: SearchBox = DEFAULT_BOX,
                 deadline: float | None = None):
        if budget < 1:
            raise ValueError(f"budget must be at least 1, got {budget}")
        self._objective = objective
        self.budget = int(budget)
        self.budget_remaining = int(budget)
        self.seed = seed
        self.box = box
        self.deadline = deadline
        self.log: list[Evaluation] = []
        self._cache: dict[tuple[int, int], float] = {}
        self.unconverged_folds = 0

    @property
    def eval_count(self) -> int:
        return len(self.log)

    def evaluate(self, point: HyperPoint) -> Evaluation:
        if self.budget_remaining <= 0:
            raise BudgetExhausted("budget exhausted")
        if self.deadline is not None and time.perf_counter() > self.deadline:
            raise TimeLimitExceeded("trial time limit exceeded")
        clamped = self.box.clip(point)
        key = clamped.key()
        accuracy = self._cache.get(key)
        if accuracy is None:
            accuracy = float(self._objective(clamped))
            self._cache[key] = accuracy
        self.budget_remaining -= 1
        record = Evaluation(clamped, accuracy, seq=len(self.log))
        self.log.append(record)
        return record

    def best_value(self) -> float:
        if not self.log:
            raise RuntimeError("no evaluations recorded")
        return max(e.accuracy for e in self.log)

    def best_so_far(self) -> list[HyperPoint]:
        """All distinct points achieving the best accuracy, in first-seen order."""
        best = self.best_value()
        seen: set[tuple[int, int]] = set()
        out: list[HyperPoint] = []
        for e in self.log:
            if e.accuracy == best and e.point.key() not in seen:
                seen.add(e.point.key())
                out.append(e.point)
        return out

    def log_records(self) -> list[dict]:
        return [e.to_json_dict() for e in self.log]

    def write_log(self, path) -> None:
        with open(path, "w") as fh:
            for rec in self.log_records():
                fh.write(json.dumps(rec) + "\n")

    @classmethod
    def cross_validated(cls, features: np.ndarray, labels: np.ndarray,
                        fold_of: np.ndarray, budget: int, *, kernel: str = "rbf",
                        tol: float = 1e-3, max_passes: int | None = None,
                        seed: int = 0, box: SearchBox = DEFAULT_BOX,
                        deadline: float | None = None) -> "SurfaceEvaluator":
        """Evaluator whose objective is mean per-fold holdout accuracy.

        Folds are trained sequentially; a fold whose solver stops on its
        iteration cap still contributes its measured accuracy, and the
        evaluator counts such folds in ``unconverged_folds``.
        """
        fold_of = np.asarray(fold_of)
        fold_ids = sorted(set(int(f) for f in fold_of))
        if len(fold_ids) < 2:
            raise ValueError("need at least 2 folds")
        splits = []
        for f in fold_ids:
            test_mask = fold_of == f
            splits.append((np.flatnonzero(~test_mask), np.flatnonzero(test_mask)))

        evaluator_ref: list[SurfaceEvaluator] = []

        def objective(point: HyperPoint) -> float:
            accuracies = []
            for train_idx, test_idx in splits:
                model = SvmClassifier(
                    C=point.c, gamma=point.gamma, kernel=kernel,
                    tol=tol, max_passes=max_passes)
                model.fit(features[train_idx], labels[train_idx])
                if not model.converged_ and evaluator_ref:
                    evaluator_ref[0].unconverged_folds += 1
                predicted = model.predict(features[test_idx])
                accuracies.append(float(np.mean(predicted == labels[test_idx])))
            return float(np.mean(accuracies))

        evaluator = cls(objective, budget, seed=seed, box=box, deadline=deadline)
        evaluator_ref.append(evaluator)
        return evaluator
