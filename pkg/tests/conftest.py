import numpy as np
import pytest

from rbftune.data import fold_assignment, make_blobs, prepare_dataset
from rbftune.registry import SearchTask
from rbftune.space import HyperPoint
from rbftune.surface import SurfaceEvaluator


@pytest.fixture(scope="session")
def easy_dataset():
    """Well-separated blobs: nearly flat accuracy surface near 1.0."""
    return prepare_dataset(make_blobs(30, separation=6.0, seed=5, name="easy"))


@pytest.fixture(scope="session")
def noisy_dataset():
    """Overlapping blobs: the surface actually varies with (C, gamma)."""
    return prepare_dataset(make_blobs(60, separation=2.5, seed=4, name="noisy"))


@pytest.fixture
def easy_task(easy_dataset):
    folds = fold_assignment(easy_dataset.labels, 5, seed=11)
    return SearchTask(easy_dataset.features, easy_dataset.labels, folds, seed=3)


def concave_objective(p: HyperPoint) -> float:
    """Analytic surrogate with its peak at (5, -5); no SVM involved."""
    return -((p.log2c - 5.0) ** 2 + (p.log2gamma + 5.0) ** 2) / 100.0


def surrogate_evaluator(budget: int, seed: int = 0) -> SurfaceEvaluator:
    return SurfaceEvaluator(concave_objective, budget, seed=seed)


@pytest.fixture
def surrogate():
    return surrogate_evaluator


# One pass/fail line per acceptance criterion, filled in by
# test_acceptance.py and echoed after the test summary so the verdicts
# stay visible even though test stdout is captured.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
