"""Command line entry point.

Four subcommands share one JSON config file:

  tune       search one dataset's 5-fold surface and print the chosen point
  benchmark  run the nested-CV campaign over all datasets and algorithms
  stability  compare two refolded runs of a grid-like searcher
  report     re-aggregate an existing trials file without recomputing

Every run is deterministic given the config plus seeds; wall-clock
fields are the only exception. Exit codes: 0 success, 1 usage or config
problem, 2 data problem, 3 campaign finished with flagged trials.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

from . import harness
from .data import DataError, Dataset, fold_assignment, load_csv, make_blobs, \
    prepare_dataset
from .registry import SearchTask, get_searcher
from .selection import RULES, select
from .stats import bootstrap_ci_mean

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_PARTIAL = 3

CI_COLUMNS = ("algorithm", "metric", "mean", "low", "high")
PLOT_COLUMNS = ("algorithm", "mean_accgain", "log10_eval_ratio")


class ConfigError(ValueError):
    """The config file is missing, malformed, or inconsistent."""


class UsageError(ValueError):
    """Bad command line; raised instead of argparse's SystemExit."""


@dataclass
class RunConfig:
    """Validated run description parsed from the JSON config file."""

    datasets: list[dict]
    algorithms: list[str]
    seed_split: int
    seed_search: int
    k_inner: int = 5
    baseline: str = harness.BASELINE_ALGORITHM
    output_dir: str = "runs"
    time_limit_secs: float | None = None
    selection_rule: str = "randCg"
    jobs: int = 1
    fold_seeds: tuple[int, int] | None = None


def load_config(path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")

    for key in ("seed_split", "seed_search"):
        if not isinstance(raw.get(key), int):
            raise ConfigError(f"config must set integer {key!r}; "
                              "seeds are mandatory, there is no clock seeding")
    datasets = raw.get("datasets")
    if not isinstance(datasets, list) or not datasets:
        raise ConfigError("config must list at least one dataset")
    algorithms = raw.get("algorithms", [])
    if not isinstance(algorithms, list):
        raise ConfigError("'algorithms' must be a list of searcher names")
    for name in algorithms:
        get_searcher(name)
    baseline = raw.get("baseline", harness.BASELINE_ALGORITHM)
    get_searcher(baseline)
    rule = raw.get("selection_rule", "randCg")
    if rule not in RULES:
        raise ConfigError(f"unknown selection rule {rule!r}; rules: {RULES}")
    fold_seeds = raw.get("fold_seeds")
    if fold_seeds is not None:
        if (not isinstance(fold_seeds, list) or len(fold_seeds) != 2
                or not all(isinstance(s, int) for s in fold_seeds)):
            raise ConfigError("'fold_seeds' must be a pair of integers")
        fold_seeds = (fold_seeds[0], fold_seeds[1])
    k_inner = raw.get("k_inner", 5)
    if not isinstance(k_inner, int) or k_inner < 2:
        raise ConfigError("'k_inner' must be an integer of at least 2")
    time_limit = raw.get("time_limit_secs")
    if time_limit is not None and not (isinstance(time_limit, (int, float))
                                       and time_limit > 0):
        raise ConfigError("'time_limit_secs' must be a positive number")
    jobs = raw.get("jobs", 1)
    if not isinstance(jobs, int) or jobs < 1:
        raise ConfigError("'jobs' must be a positive integer")
    return RunConfig(
        datasets=datasets, algorithms=list(algorithms),
        seed_split=raw["seed_split"], seed_search=raw["seed_search"],
        k_inner=k_inner, baseline=baseline,
        output_dir=raw.get("output_dir", "runs"),
        time_limit_secs=None if time_limit is None else float(time_limit),
        selection_rule=rule, jobs=jobs, fold_seeds=fold_seeds)


def load_dataset(spec: dict) -> Dataset:
    """Materialize one dataset entry: a CSV path or synthetic blobs."""
    if not isinstance(spec, dict):
        raise ConfigError("each dataset entry must be a JSON object")
    if "blobs" in spec:
        b = spec["blobs"]
        raw = make_blobs(n=b.get("n", 200), d=b.get("d", 2),
                         separation=b.get("separation", 4.0),
                         seed=b.get("seed", 0),
                         name=b.get("name", f"blobs-{b.get('seed', 0)}"))
        return prepare_dataset(raw)
    if "path" in spec:
        if "label_column" not in spec:
            raise ConfigError(f"dataset {spec.get('path')}: 'label_column' is required")
        raw = load_csv(spec["path"], spec["label_column"],
                       spec.get("categorical_columns"),
                       name=spec.get("name"))
        return prepare_dataset(raw)
    raise ConfigError("dataset entry needs either 'path' or 'blobs'")


def load_datasets(config: RunConfig) -> list[Dataset]:
    datasets = [load_dataset(spec) for spec in config.datasets]
    names = [ds.name for ds in datasets]
    if len(set(names)) != len(names):
        raise ConfigError(f"dataset names must be unique, got {names}")
    return datasets


def _write_rows(path: Path, columns: tuple[str, ...], rows: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(str(row[c]) for c in columns))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_tune(config: RunConfig, args) -> int:
    if not args.algorithm:
        raise UsageError("tune needs --algorithm")
    spec = get_searcher(args.algorithm)
    datasets = load_datasets(config)
    if args.dataset is None:
        ds = datasets[0]
    else:
        by_name = {d.name: d for d in datasets}
        if args.dataset not in by_name:
            raise ConfigError(f"no dataset named {args.dataset!r} in config; "
                              f"have {sorted(by_name)}")
        ds = by_name[args.dataset]

    fold_of = fold_assignment(ds.labels, config.k_inner, config.seed_split)
    task = SearchTask(ds.features, ds.labels, fold_of, config.seed_search)
    result = spec.runner(task)
    point = select(result.tie_set, config.selection_rule, config.seed_search)

    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / f"eval_log_{ds.name}_{spec.name}.jsonl"
    with log_path.open("w", encoding="utf-8") as fh:
        for entry in result.log + result.extra_log:
            fh.write(json.dumps(entry.to_json_dict()) + "\n")

    print(f"algorithm: {spec.name}")
    print(f"dataset: {ds.name}")
    print(f"C: {point.c}")
    print(f"gamma: {point.gamma}")
    print(f"log2C: {point.log2c}")
    print(f"log2gamma: {point.log2gamma}")
    print(f"cv_accuracy: {result.tie_value}")
    print(f"evaluations: {result.eval_count}")
    print(f"tie_set_size: {len(result.tie_set)}")
    print(f"eval_log: {log_path}")
    return EXIT_OK


def _aggregate(records, config: RunConfig, out_dir: Path) -> None:
    """Write gains.csv, ci.csv and plot_data.csv from trial records."""
    rows = harness.gain_table(records, config.baseline)
    harness.write_gain_csv(out_dir / "gains.csv", rows)

    by_algorithm: dict[str, list[dict]] = {}
    for row in rows:
        by_algorithm.setdefault(row["algorithm"], []).append(row)

    ci_rows, plot_rows = [], []
    for algorithm in sorted(by_algorithm):
        arows = by_algorithm[algorithm]
        accgains = [r["accgain"] for r in arows]
        fgains = [r["future_gain"] for r in arows]
        for metric, values in (("accgain", accgains), ("future_gain", fgains)):
            if len(values) >= 2:
                ci = bootstrap_ci_mean(values, seed=config.seed_search)
                ci_rows.append({"algorithm": algorithm, "metric": metric,
                                "mean": ci.mean, "low": ci.low, "high": ci.high})
            else:
                ci_rows.append({"algorithm": algorithm, "metric": metric,
                                "mean": values[0], "low": values[0],
                                "high": values[0]})
        mean_ratio = sum(r["eval_ratio"] for r in arows) / len(arows)
        plot_rows.append({"algorithm": algorithm,
                          "mean_accgain": sum(accgains) / len(accgains),
                          "log10_eval_ratio": math.log10(mean_ratio)})
    _write_rows(out_dir / "ci.csv", CI_COLUMNS, ci_rows)
    _write_rows(out_dir / "plot_data.csv", PLOT_COLUMNS, plot_rows)


def cmd_benchmark(config: RunConfig, args) -> int:
    if len(config.algorithms) < 2:
        raise ConfigError("benchmark needs at least 2 algorithms")
    if config.baseline not in config.algorithms:
        raise ConfigError(f"baseline {config.baseline!r} must be in 'algorithms'")
    datasets = load_datasets(config)
    out_dir = Path(config.output_dir)
    records = harness.run_campaign(
        datasets, config.algorithms, records_path=out_dir / "trials.jsonl",
        seed_split=config.seed_split, seed_search=config.seed_search,
        k_inner=config.k_inner, selection_rule=config.selection_rule,
        time_limit_secs=config.time_limit_secs, jobs=config.jobs)
    _aggregate(records, config, out_dir)
    flagged = [r for r in records if r.failed]
    print(f"trials: {len(records)} ({len(flagged)} flagged)")
    print(f"outputs: {out_dir / 'trials.jsonl'}, {out_dir / 'gains.csv'}, "
          f"{out_dir / 'ci.csv'}, {out_dir / 'plot_data.csv'}")
    if flagged:
        for r in flagged:
            print(f"flagged: {r.key()} {r.flags}")
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_stability(config: RunConfig, args) -> int:
    if not args.algorithm:
        raise UsageError("stability needs --algorithm")
    if args.fold_seeds is not None:
        fold_seeds = args.fold_seeds
    elif config.fold_seeds is not None:
        fold_seeds = config.fold_seeds
    else:
        raise ConfigError("stability needs 'fold_seeds' in the config "
                          "or --fold-seeds A,B")
    datasets = load_datasets(config)
    report = harness.two_run_stability(
        args.algorithm, datasets, fold_seeds, seed_split=config.seed_split,
        seed_search=config.seed_search, k_inner=config.k_inner)
    out_dir = Path(config.output_dir)
    out_path = out_dir / "stability.csv"
    harness.write_stability_csv(out_path, report)
    for name, value in zip(harness.STABILITY_MEASUREMENTS,
                           report.measurement_values()):
        print(f"{name}: {value}")
    print(f"report: {out_path}")
    return EXIT_OK


def cmd_report(config: RunConfig, args) -> int:
    out_dir = Path(config.output_dir)
    trials = out_dir / "trials.jsonl"
    if not trials.exists():
        raise DataError(f"no trials file at {trials}; run benchmark first")
    records = harness.load_records(trials)
    if not records:
        raise DataError(f"trials file {trials} is empty")
    _aggregate(records, config, out_dir)
    flagged = [r for r in records if r.failed]
    print(f"re-aggregated {len(records)} trials ({len(flagged)} flagged)")
    print(f"outputs: {out_dir / 'gains.csv'}, {out_dir / 'ci.csv'}, "
          f"{out_dir / 'plot_data.csv'}")
    return EXIT_PARTIAL if flagged else EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _parse_fold_seeds(text: str) -> tuple[int, int]:
    parts = text.split(",")
    try:
        a, b = (int(p) for p in parts)
    except ValueError:
        # ArgumentTypeError is the one exception argparse relays verbatim.
        raise argparse.ArgumentTypeError(
            f"wants two integers like 1,2; got {text!r}")
    return a, b


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rbftune",
                     description="Tune RBF SVM hyperparameters and benchmark "
                                 "search algorithms under fixed budgets.")
    sub = parser.add_subparsers(dest="command", required=True)
    specs = (("tune", cmd_tune, "search one dataset and print the result"),
             ("benchmark", cmd_benchmark, "run the nested-CV campaign"),
             ("stability", cmd_stability, "two-run fold-stability analysis"),
             ("report", cmd_report, "re-aggregate an existing trials file"))
    for name, func, help_text in specs:
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--jobs", type=int, default=None,
                       help="concurrent trials (default from config, else 1)")
        p.add_argument("--output-dir", default=None,
                       help="directory for result files (overrides config)")
        p.add_argument("--algorithm", default=None,
                       help="searcher name from the registry")
        p.add_argument("--seed-split", type=int, default=None,
                       help="override the outer-split seed")
        p.add_argument("--seed-search", type=int, default=None,
                       help="override the searcher seed")
        p.add_argument("--time-limit-secs", type=float, default=None,
                       help="per-trial wall-clock limit")
        if name == "tune":
            p.add_argument("--dataset", default=None,
                           help="dataset name from the config (default: first)")
        if name == "stability":
            p.add_argument("--fold-seeds", type=_parse_fold_seeds, default=None,
                           metavar="A,B", help="the two inner-fold seeds")
    return parser


def _apply_overrides(config: RunConfig, args) -> RunConfig:
    if args.jobs is not None:
        if args.jobs < 1:
            raise UsageError("--jobs must be a positive integer")
        config.jobs = args.jobs
    if args.output_dir is not None:
        config.output_dir = args.output_dir
    if args.seed_split is not None:
        config.seed_split = args.seed_split
    if args.seed_search is not None:
        config.seed_search = args.seed_search
    if args.time_limit_secs is not None:
        if args.time_limit_secs <= 0:
            raise UsageError("--time-limit-secs must be positive")
        config.time_limit_secs = args.time_limit_secs
    return config


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = _apply_overrides(load_config(args.config), args)
        return args.func(config, args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyError as exc:
        print(f"config error: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def console_main() -> None:
    sys.exit(main())
