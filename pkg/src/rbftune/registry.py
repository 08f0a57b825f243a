"""Catalog of every named search algorithm.

A searcher is a recipe with a declared evaluation budget, a flag saying
whether its probe set is fixed before any surface evaluation (grid-like),
and a runner. Runners take a SearchTask describing one training subset
and give back a SearchResult with the tie set of best points, the
evaluation logs, and the exact number of evaluations spent.

Budgets are contracts: flat plans and fixed-gamma C grids consume exactly
their declared N, population methods consume the largest multiple of
their generation size that fits, and every other searcher stops at or
below N.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bayesopt import gp_bayes_opt, tpe_search
from .optimizers import (cma_es, nelder_mead, particle_swarm,
                         quad_trust_region, simulated_annealing)
from .probes import (grid_points, normrand_points, rand_points, run_flat,
                     run_hier, ud_points)
from .selection import TieSet
from .space import DEFAULT_BOX, SearchBox
from .surface import Evaluation, SurfaceEvaluator
from .svmspecific import (asymp_search, dbtc_gamma, fixed_gamma_c_search,
                          sigest_gamma, skl_gamma)


@dataclass
class SearchTask:
    """One training subset plus everything a searcher needs to probe it."""

    features: np.ndarray
    labels: np.ndarray
    fold_of: np.ndarray
    seed: int
    box: SearchBox = DEFAULT_BOX
    tol: float = 1e-3
    max_passes: int | None = None
    deadline: float | None = None

    def evaluator(self, budget: int, kernel: str = "rbf") -> SurfaceEvaluator:
        return SurfaceEvaluator.cross_validated(
            self.features, self.labels, self.fold_of, budget, kernel=kernel,
            tol=self.tol, max_passes=self.max_passes, seed=self.seed,
            box=self.box, deadline=self.deadline)


@dataclass
class SearchResult:
    """What a completed search hands to the harness."""

    tie_set: TieSet
    tie_value: float
    eval_count: int
    log: list[Evaluation]
    extra_log: list[Evaluation] = field(default_factory=list)
    unconverged_folds: int = 0


@dataclass(frozen=True)
class SearcherSpec:
    name: str
    budget: int
    grid_like: bool
    runner: Callable[[SearchTask], SearchResult]


def _finish(points, ev: SurfaceEvaluator,
            extra: SurfaceEvaluator | None = None) -> SearchResult:
    extra_log = list(extra.log) if extra is not None else []
    extra_unconverged = extra.unconverged_folds if extra is not None else 0
    return SearchResult(
        tie_set=TieSet.from_points(points),
        tie_value=ev.best_value(),
        eval_count=len(ev.log) + len(extra_log),
        log=list(ev.log),
        extra_log=extra_log,
        unconverged_folds=ev.unconverged_folds + extra_unconverged)


def _plan(generator: str, n: int, task: SearchTask):
    if generator == "grid":
        return grid_points(n, task.box)
    if generator == "ud":
        return ud_points(n, task.box)
    if generator == "rand":
        return rand_points(n, task.seed, task.box)
    if generator == "normrand":
        return normrand_points(n, task.seed, task.box)
    raise ValueError(f"unknown plan generator {generator!r}")


def _flat_runner(generator: str, n: int):
    def run(task: SearchTask) -> SearchResult:
        ev = task.evaluator(n)
        points = run_flat(ev, _plan(generator, n, task))
        return _finish(points, ev)
    return run


def _hier_runner(generator: str, n_per_level: int):
    def run(task: SearchTask) -> SearchResult:
        ev = task.evaluator(2 * n_per_level)
        points = run_hier(ev, generator, n_per_level)
        return _finish(points, ev)
    return run


def _opt_runner(optimizer, n: int):
    def run(task: SearchTask) -> SearchResult:
        ev = task.evaluator(n)
        points = optimizer(ev, n, task.seed)
        return _finish(points, ev)
    return run


def _fixed_gamma_runner(method: str, n_c: int):
    def run(task: SearchTask) -> SearchResult:
        if method == "skl":
            estimate = skl_gamma(task.features.shape[1])
        elif method == "sigest":
            estimate = sigest_gamma(task.features, task.seed)
        elif method == "dbtc":
            estimate = dbtc_gamma(task.features, task.labels)
        elif method == "sdbtc":
            estimate = dbtc_gamma(task.features, task.labels,
                                  sample_fraction=0.5, seed=task.seed)
        else:
            raise ValueError(f"unknown gamma method {method!r}")
        ev = task.evaluator(n_c)
        points = fixed_gamma_c_search(ev, estimate.gamma, n_c)
        return _finish(points, ev)
    return run


def _asymp_runner(total: int):
    n_pair = total // 2

    def run(task: SearchTask) -> SearchResult:
        ev_linear = task.evaluator(n_pair, kernel="linear")
        ev_rbf = task.evaluator(n_pair)
        points = asymp_search(ev_linear, ev_rbf, n_pair)
        return _finish(points, ev_rbf, extra=ev_linear)
    return run


def _build_registry() -> dict[str, SearcherSpec]:
    registry: dict[str, SearcherSpec] = {}

    def add(name: str, budget: int, grid_like: bool, runner) -> None:
        registry[name] = SearcherSpec(name, budget, grid_like, runner)

    for generator in ("grid", "ud", "rand", "normrand"):
        for n in (25, 100, 400):
            add(f"{generator}{n}", n, True, _flat_runner(generator, n))
    for generator in ("grid", "ud"):
        for n_per_level in (25, 100):
            add(f"{generator}hier{2 * n_per_level}", 2 * n_per_level, False,
                _hier_runner(generator, n_per_level))
    for prefix, optimizer in (("nelder", nelder_mead),
                              ("bobyqa", quad_trust_region),
                              ("sa", simulated_annealing),
                              ("pso", particle_swarm)):
        for n in (25, 100, 400):
            add(f"{prefix}{n}", n, False, _opt_runner(optimizer, n))
    for n in (100, 400):
        add(f"cma{n}", n, False, _opt_runner(cma_es, n))
        add(f"bogp{n}", n, False, _opt_runner(gp_bayes_opt, n))
        add(f"tpe{n}", n, False, _opt_runner(tpe_search, n))
    add("skl1", 1, False, _fixed_gamma_runner("skl", 1))
    for method in ("skl", "sigest", "dbtc", "sdbtc"):
        for n_c in (5, 10, 20):
            add(f"{method}{n_c}", n_c, False, _fixed_gamma_runner(method, n_c))
    for total in (10, 20, 40):
        add(f"asymp{total}", total, False, _asymp_runner(total))
    return registry


REGISTRY: dict[str, SearcherSpec] = _build_registry()


def get_searcher(name: str) -> SearcherSpec:
    try:
        return REGISTRY[name]
    except KeyError:
        known = ", ".join(searcher_names())
        raise KeyError(f"unknown searcher {name!r}; known searchers: {known}") from None


def searcher_names() -> list[str]:
    return sorted(REGISTRY)
