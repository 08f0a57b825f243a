"""rbftune: budgeted hyperparameter search for RBF SVMs.

The package tunes the two RBF SVM hyperparameters (C, gamma) over a
log2 box with seventeen families of search algorithms under explicit
evaluation budgets, and benchmarks them against each other with a
nested cross-validation harness, rank statistics, and a two-run
stability diagnostic.

Typical use is either the SvmTuner estimator::

    from rbftune import SvmTuner
    model = SvmTuner(algorithm="ud100", seed=7).fit(X, y)
    model.predict(X_new)

or the ``rbftune`` command line for campaigns over many datasets.
"""

from .data import (DataError, Dataset, RawDataset, SplitPlan,
                   dataset_from_arrays, fold_assignment, load_csv,
                   make_blobs, make_split_plan, prepare_dataset)
from .harness import (StabilityReport, TrialRecord, accuracy_gain,
                      cost_ratio, future_accuracy, future_gain, gain_table,
                      load_records, mean_best_accuracy, run_campaign,
                      run_trial, two_run_stability, write_gain_csv)
from .registry import (REGISTRY, SearcherSpec, SearchResult, SearchTask,
                       get_searcher, searcher_names)
from .selection import RULES, TieSet, select
from .space import DEFAULT_BOX, HyperPoint, SearchBox
from .stats import (CiResult, NemenyiResult, RankTestResult, SelectionCase,
                    bootstrap_ci_mean, friedman_test, nemenyi_test,
                    selection_rule_comparison)
from .surface import BudgetExhausted, Evaluation, SurfaceEvaluator, TimeLimitExceeded
from .svm import SvmClassifier
from .tuner import SvmTuner

__version__ = "0.1.0"

__all__ = [
    "BudgetExhausted", "CiResult", "DEFAULT_BOX", "DataError", "Dataset",
    "Evaluation", "HyperPoint", "NemenyiResult", "REGISTRY", "RULES",
    "RankTestResult", "RawDataset", "SearchBox", "SearchResult",
    "SearchTask", "SearcherSpec", "SelectionCase", "SplitPlan",
    "StabilityReport", "SurfaceEvaluator", "SvmClassifier", "SvmTuner",
    "TieSet", "TimeLimitExceeded", "TrialRecord", "accuracy_gain",
    "bootstrap_ci_mean", "cost_ratio", "dataset_from_arrays",
    "fold_assignment", "friedman_test", "future_accuracy", "future_gain",
    "gain_table", "get_searcher", "load_csv", "load_records", "make_blobs",
    "make_split_plan", "mean_best_accuracy", "nemenyi_test",
    "prepare_dataset", "run_campaign", "run_trial", "searcher_names",
    "select", "selection_rule_comparison", "two_run_stability",
    "write_gain_csv", "__version__",
]
