"""Nested cross-validation benchmark harness.

The protocol: split each dataset into two stratified outer subsets. On
each subset, a searcher probes the 5-fold cross-validation surface, the
randCg rule picks one point theta from the tie set, alpha records the
best surface value, and beta measures a single model trained on the
whole subset at theta against the opposite subset. Gains compare an
algorithm's 2-fold means against a baseline searcher on the same
dataset; cost is reported as evaluation-count and wall-time ratios.

Trial records persist as JSON Lines, one per line, append-only. A rerun
skips (algorithm, dataset, subset, seed) keys that are already on disk,
so interrupted campaigns resume without recomputation. Everything except
wall-clock fields is bit-for-bit reproducible from the seeds.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from statistics import mean, median

import numpy as np
from scipy.stats import rankdata

from .data import Dataset, SplitPlan, make_split_plan
from .registry import SearchTask, get_searcher
from .selection import TieSet, select
from .space import DEFAULT_BOX, HyperPoint, SearchBox
from .stats import SelectionCase
from .surface import Evaluation
from .svm import SvmClassifier

BASELINE_ALGORITHM = "grid100"
GAIN_COLUMNS = ("algorithm", "dataset", "accgain", "future_gain",
                "eval_ratio", "time_ratio")
STABILITY_MEASUREMENTS = ("n_single_best", "same_best_proportion",
                          "mean_cross_run_rank", "median_best_second_gap",
                          "median_cross_run_best_gap", "mean_log_distance")


@dataclass
class TrialRecord:
    """Outcome of one (algorithm, dataset, outer subset) search."""

    algorithm: str
    dataset: str
    subset: int
    seed: int
    theta: HyperPoint | None
    alpha: float | None
    beta: float | None
    eval_count: int
    wall_time: float
    tie_set_size: int
    tie_set: tuple[HyperPoint, ...] = ()
    flags: tuple[str, ...] = ()
    unconverged_folds: int = 0

    @property
    def failed(self) -> bool:
        return any(f == "time_limit" or f.startswith("error:") for f in self.flags)

    def key(self) -> tuple[str, str, int, int]:
        return (self.algorithm, self.dataset, self.subset, self.seed)

    def to_json_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "dataset": self.dataset,
            "subset": self.subset,
            "seed": self.seed,
            "theta": None if self.theta is None else self.theta.to_json_dict(),
            "alpha": self.alpha,
            "beta": self.beta,
            "eval_count": self.eval_count,
            "wall_time": self.wall_time,
            "tie_set_size": self.tie_set_size,
            "tie_set": [p.to_json_dict() for p in self.tie_set],
            "flags": list(self.flags),
            "unconverged_folds": self.unconverged_folds,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "TrialRecord":
        theta = d.get("theta")
        return cls(
            algorithm=d["algorithm"], dataset=d["dataset"],
            subset=int(d["subset"]), seed=int(d["seed"]),
            theta=None if theta is None else HyperPoint.from_json_dict(theta),
            alpha=d.get("alpha"), beta=d.get("beta"),
            eval_count=int(d["eval_count"]), wall_time=float(d["wall_time"]),
            tie_set_size=int(d["tie_set_size"]),
            tie_set=tuple(HyperPoint.from_json_dict(p) for p in d.get("tie_set", [])),
            flags=tuple(d.get("flags", [])),
            unconverged_folds=int(d.get("unconverged_folds", 0)))


@dataclass
class StabilityReport:
    """Six agreement measurements between two refolded runs of a searcher."""

    algorithm: str
    n_cases: int
    n_single_best: int
    same_best_proportion: float
    mean_cross_run_rank: float
    median_best_second_gap: float
    median_cross_run_best_gap: float
    mean_log_distance: float

    def measurement_values(self) -> list[float]:
        return [float(getattr(self, m)) for m in STABILITY_MEASUREMENTS]


def run_trial(algorithm: str, dataset: Dataset, plan: SplitPlan, subset: int,
              seed: int, *, selection_rule: str = "randCg",
              box: SearchBox = DEFAULT_BOX, tol: float = 1e-3,
              max_passes: int | None = None,
              time_limit_secs: float | None = None) -> TrialRecord:
    """Search one outer subset and measure the selected point.

    A trial that raises (including a per-trial time limit) comes back as
    a flagged record with no theta/alpha/beta; aggregation skips such
    records the same way timed-out runs are dropped from comparisons.
    """
    spec = get_searcher(algorithm)
    rows = plan.subset_rows(subset)
    other_rows = plan.subset_rows(plan.other_subset(subset))
    start = time.perf_counter()
    deadline = None if time_limit_secs is None else start + time_limit_secs
    try:
        task = SearchTask(dataset.features[rows], dataset.labels[rows],
                          plan.fold_of[rows], seed, box=box, tol=tol,
                          max_passes=max_passes, deadline=deadline)
        result = spec.runner(task)
        theta = select(result.tie_set, selection_rule, seed)
        model = SvmClassifier(C=theta.c, gamma=theta.gamma, tol=tol,
                              max_passes=max_passes)
        model.fit(dataset.features[rows], dataset.labels[rows])
        predictions = model.predict(dataset.features[other_rows])
        beta = float(np.mean(predictions == dataset.labels[other_rows]))
        flags = []
        if result.unconverged_folds:
            flags.append(f"unconverged_folds:{result.unconverged_folds}")
        return TrialRecord(
            algorithm=spec.name, dataset=dataset.name, subset=subset, seed=seed,
            theta=theta, alpha=result.tie_value, beta=beta,
            eval_count=result.eval_count,
            wall_time=time.perf_counter() - start,
            tie_set_size=len(result.tie_set),
            tie_set=tuple(result.tie_set.pairs), flags=tuple(flags),
            unconverged_folds=result.unconverged_folds)
    except Exception as exc:
        flag = ("time_limit" if type(exc).__name__ == "TimeLimitExceeded"
                else f"error:{type(exc).__name__}:{exc}")
        return TrialRecord(
            algorithm=spec.name, dataset=dataset.name, subset=subset, seed=seed,
            theta=None, alpha=None, beta=None, eval_count=0,
            wall_time=time.perf_counter() - start, tie_set_size=0,
            tie_set=(), flags=(flag,), unconverged_folds=0)


def load_records(path) -> list[TrialRecord]:
    path = Path(path)
    if not path.exists():
        return []
    records = []
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(TrialRecord.from_json_dict(json.loads(line)))
    return records


def append_record(path, record: TrialRecord) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a", encoding="utf-8") as fh:
        fh.write(json.dumps(record.to_json_dict()) + "\n")


def run_campaign(datasets: list[Dataset], algorithms: list[str], *,
                 records_path, seed_split: int, seed_search: int,
                 k_inner: int = 5, selection_rule: str = "randCg",
                 box: SearchBox = DEFAULT_BOX, tol: float = 1e-3,
                 max_passes: int | None = None,
                 time_limit_secs: float | None = None,
                 jobs: int = 1) -> list[TrialRecord]:
    """Run every (algorithm, dataset, subset) trial not already on disk.

    Each finished trial is appended to the JSON Lines file immediately,
    so an interrupted campaign picks up where it stopped. With jobs > 1
    trials run on a thread pool but are written in submission order by
    this coordinating thread.
    """
    records = load_records(records_path)
    done = {r.key() for r in records}
    pending = []
    for ds in datasets:
        plan = make_split_plan(ds, k_inner, seed_split)
        for algorithm in algorithms:
            for subset in (1, 2):
                if (algorithm, ds.name, subset, seed_search) in done:
                    continue
                pending.append((algorithm, ds, plan, subset))

    def work(item) -> TrialRecord:
        algorithm, ds, plan, subset = item
        return run_trial(algorithm, ds, plan, subset, seed_search,
                         selection_rule=selection_rule, box=box, tol=tol,
                         max_passes=max_passes,
                         time_limit_secs=time_limit_secs)

    path = Path(records_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a", encoding="utf-8") as fh:
        if jobs <= 1:
            produced = map(work, pending)
            for record in produced:
                records.append(record)
                fh.write(json.dumps(record.to_json_dict()) + "\n")
                fh.flush()
        else:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                for record in pool.map(work, pending):
                    records.append(record)
                    fh.write(json.dumps(record.to_json_dict()) + "\n")
                    fh.flush()
    return records


def _usable_record(records: list[TrialRecord], algorithm: str, dataset: str,
                   subset: int) -> TrialRecord:
    for r in records:
        if (r.algorithm == algorithm and r.dataset == dataset
                and r.subset == subset):
            if r.failed:
                raise ValueError(
                    f"record for ({algorithm}, {dataset}, subset {subset}) is flagged")
            return r
    raise ValueError(f"missing record for ({algorithm}, {dataset}, subset {subset})")


def mean_best_accuracy(records: list[TrialRecord], algorithm: str,
                       dataset: str) -> float:
    """2-fold mean of the best surface value (alpha) across outer subsets."""
    r1 = _usable_record(records, algorithm, dataset, 1)
    r2 = _usable_record(records, algorithm, dataset, 2)
    return (r1.alpha + r2.alpha) / 2.0


def future_accuracy(records: list[TrialRecord], algorithm: str,
                    dataset: str) -> float:
    """2-fold mean of opposite-subset accuracy (beta) at the selected point."""
    r1 = _usable_record(records, algorithm, dataset, 1)
    r2 = _usable_record(records, algorithm, dataset, 2)
    return (r1.beta + r2.beta) / 2.0


def accuracy_gain(records: list[TrialRecord], algorithm: str, dataset: str,
                  baseline: str = BASELINE_ALGORITHM) -> float:
    return (mean_best_accuracy(records, algorithm, dataset)
            - mean_best_accuracy(records, baseline, dataset))


def future_gain(records: list[TrialRecord], algorithm: str, dataset: str,
                baseline: str = BASELINE_ALGORITHM) -> float:
    return (future_accuracy(records, algorithm, dataset)
            - future_accuracy(records, baseline, dataset))


def cost_ratio(records: list[TrialRecord], algorithm: str, dataset: str,
               baseline: str = BASELINE_ALGORITHM) -> tuple[float, float]:
    """(time_ratio, eval_ratio) of an algorithm versus the baseline.

    Wall time is hardware-specific; the evaluation ratio is the portable
    cost measure.
    """
    ra = [_usable_record(records, algorithm, dataset, s) for s in (1, 2)]
    rb = [_usable_record(records, baseline, dataset, s) for s in (1, 2)]
    base_time = sum(r.wall_time for r in rb)
    if base_time <= 0.0:
        raise ValueError("zero baseline time")
    time_ratio = sum(r.wall_time for r in ra) / base_time
    eval_ratio = sum(r.eval_count for r in ra) / sum(r.eval_count for r in rb)
    return time_ratio, eval_ratio


def gain_table(records: list[TrialRecord],
               baseline: str = BASELINE_ALGORITHM) -> list[dict]:
    """Per-(algorithm, dataset) gains and cost ratios versus the baseline.

    Datasets with flagged or missing records for either side are left
    out of that algorithm's rows.
    """
    algorithms = sorted({r.algorithm for r in records})
    datasets = sorted({r.dataset for r in records})
    rows = []
    for algorithm in algorithms:
        for dataset in datasets:
            try:
                accgain = accuracy_gain(records, algorithm, dataset, baseline)
                fgain = future_gain(records, algorithm, dataset, baseline)
                time_ratio, eval_ratio = cost_ratio(records, algorithm,
                                                    dataset, baseline)
            except ValueError:
                continue
            rows.append({
                "algorithm": algorithm, "dataset": dataset,
                "accgain": accgain, "future_gain": fgain,
                "eval_ratio": eval_ratio, "time_ratio": time_ratio,
            })
    return rows


def write_gain_csv(path, rows: list[dict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(GAIN_COLUMNS)]
    for row in rows:
        lines.append(",".join(str(row[c]) for c in GAIN_COLUMNS))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _first_best(log: list[Evaluation]) -> HyperPoint:
    best = max(e.accuracy for e in log)
    for e in log:
        if e.accuracy == best:
            return e.point
    raise AssertionError("empty evaluation log")


def _rank_in_log(point: HyperPoint, log: list[Evaluation]) -> float:
    """Average rank (1 = best) of the named point's accuracy in a log."""
    accs = np.array([e.accuracy for e in log])
    ranks = rankdata(-accs, method="average")
    for i, e in enumerate(log):
        if e.point.key() == point.key():
            return float(ranks[i])
    raise ValueError("point was not probed in the other run")


def two_run_stability(algorithm: str, datasets: list[Dataset],
                      fold_seeds: tuple[int, int], *, seed_split: int,
                      seed_search: int, k_inner: int = 5,
                      box: SearchBox = DEFAULT_BOX, tol: float = 1e-3,
                      max_passes: int | None = None) -> StabilityReport:
    """Compare two runs of a grid-like searcher under different inner folds.

    Each (dataset, outer subset) pair is one case. The probe plan is
    identical across the two runs; only the inner-fold assignment
    (fold_seeds) changes, so any disagreement measures surface noise:
    (1) cases where at least one run has a singleton tie set; (2) among
    those, the proportion where both runs picked the same best point
    (vacuously 1 when none qualify); (3) mean rank of one run's best
    point inside the other run's log, both directions, ties averaged;
    (4) median within-run gap between best and second-best accuracy;
    (5) median cross-run gap between best accuracies; (6) mean log2-space
    distance between the two best points.
    """
    spec = get_searcher(algorithm)
    if not spec.grid_like:
        raise ValueError("stability requires predetermined probes")
    s1, s2 = fold_seeds
    n_cases = n_single = n_agree = 0
    ranks: list[float] = []
    within_gaps: list[float] = []
    cross_gaps: list[float] = []
    distances: list[float] = []
    for ds in datasets:
        plan1 = make_split_plan(ds, k_inner, seed_split, fold_seed=s1)
        plan2 = make_split_plan(ds, k_inner, seed_split, fold_seed=s2)
        for subset in (1, 2):
            rows = plan1.subset_rows(subset)
            runs = []
            for plan in (plan1, plan2):
                task = SearchTask(ds.features[rows], ds.labels[rows],
                                  plan.fold_of[rows], seed_search, box=box,
                                  tol=tol, max_passes=max_passes)
                runs.append(spec.runner(task))
            run1, run2 = runs
            n_cases += 1
            best1, best2 = _first_best(run1.log), _first_best(run2.log)
            if len(run1.tie_set) == 1 or len(run2.tie_set) == 1:
                n_single += 1
                n_agree += best1.key() == best2.key()
            ranks.append(_rank_in_log(best1, run2.log))
            ranks.append(_rank_in_log(best2, run1.log))
            for run in runs:
                ordered = sorted((e.accuracy for e in run.log), reverse=True)
                within_gaps.append(ordered[0] - ordered[1] if len(ordered) > 1 else 0.0)
            cross_gaps.append(abs(run1.tie_value - run2.tie_value))
            distances.append(math.hypot(best1.log2c - best2.log2c,
                                        best1.log2gamma - best2.log2gamma))
    if n_cases == 0:
        raise ValueError("no cases to compare")
    return StabilityReport(
        algorithm=algorithm, n_cases=n_cases, n_single_best=n_single,
        same_best_proportion=(n_agree / n_single) if n_single else 1.0,
        mean_cross_run_rank=mean(ranks),
        median_best_second_gap=median(within_gaps),
        median_cross_run_best_gap=median(cross_gaps),
        mean_log_distance=mean(distances))


def write_stability_csv(path, report: StabilityReport) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["algorithm,n_cases,measurement,value"]
    for name, value in zip(STABILITY_MEASUREMENTS, report.measurement_values()):
        lines.append(f"{report.algorithm},{report.n_cases},{name},{value}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_stability_csv(path) -> StabilityReport:
    lines = Path(path).read_text(encoding="utf-8").strip().splitlines()
    header, rows = lines[0], lines[1:]
    if header != "algorithm,n_cases,measurement,value" or len(rows) != 6:
        raise ValueError("not a stability report")
    values: dict[str, float] = {}
    algorithm, n_cases = None, None
    for row in rows:
        algorithm, n_cases, name, value = row.split(",")
        values[name] = float(value)
    return StabilityReport(
        algorithm=algorithm, n_cases=int(n_cases),
        n_single_best=int(values["n_single_best"]),
        same_best_proportion=values["same_best_proportion"],
        mean_cross_run_rank=values["mean_cross_run_rank"],
        median_best_second_gap=values["median_best_second_gap"],
        median_cross_run_best_gap=values["median_cross_run_best_gap"],
        mean_log_distance=values["mean_log_distance"])


def selection_cases_from_records(records: list[TrialRecord],
                                 datasets: dict[str, Dataset], *,
                                 seed_split: int, k_inner: int = 5,
                                 min_tie_size: int = 2, tol: float = 1e-3,
                                 max_passes: int | None = None
                                 ) -> list[SelectionCase]:
    """Turn persisted tie sets into cases for the selection-rule comparison.

    Each unflagged record whose tie set has at least min_tie_size members
    becomes one case; its future-accuracy callable retrains on the
    record's outer subset at a chosen point and scores the opposite
    subset, caching per point.
    """
    cases = []
    for record in records:
        if record.failed or record.tie_set_size < min_tie_size:
            continue
        ds = datasets[record.dataset]
        plan = make_split_plan(ds, k_inner, seed_split)
        rows = plan.subset_rows(record.subset)
        other_rows = plan.subset_rows(plan.other_subset(record.subset))

        def make_scorer(ds=ds, rows=rows, other_rows=other_rows):
            cache: dict[tuple[int, int], float] = {}

            def score(point: HyperPoint) -> float:
                if point.key() not in cache:
                    model = SvmClassifier(C=point.c, gamma=point.gamma,
                                          tol=tol, max_passes=max_passes)
                    model.fit(ds.features[rows], ds.labels[rows])
                    predictions = model.predict(ds.features[other_rows])
                    cache[point.key()] = float(
                        np.mean(predictions == ds.labels[other_rows]))
                return cache[point.key()]
            return score

        cases.append(SelectionCase(TieSet(record.tie_set), make_scorer()))
    return cases
