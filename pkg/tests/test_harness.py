"""Tests for the benchmark harness: trials, persistence, gains, stability."""

import dataclasses
import json

import pytest

from rbftune.data import make_blobs, make_split_plan, prepare_dataset
from rbftune.harness import (
    BASELINE_ALGORITHM,
    GAIN_COLUMNS,
    STABILITY_MEASUREMENTS,
    StabilityReport,
    TrialRecord,
    accuracy_gain,
    append_record,
    cost_ratio,
    future_accuracy,
    future_gain,
    gain_table,
    load_records,
    mean_best_accuracy,
    read_stability_csv,
    run_campaign,
    run_trial,
    selection_cases_from_records,
    two_run_stability,
    write_gain_csv,
    write_stability_csv,
)
from rbftune.space import HyperPoint


def blob_dataset(name="blob", n=36, seed=3, separation=6.0):
    return prepare_dataset(make_blobs(n, 2, separation, seed, name=name))


def synthetic_record(algorithm, dataset, subset, *, alpha=0.9, beta=0.8,
                     eval_count=100, wall_time=1.0, seed=0, flags=()):
    theta = HyperPoint(1.0, -2.0)
    return TrialRecord(algorithm=algorithm, dataset=dataset, subset=subset,
                       seed=seed, theta=theta, alpha=alpha, beta=beta,
                       eval_count=eval_count, wall_time=wall_time,
                       tie_set_size=1, tie_set=(theta,), flags=tuple(flags))


class TestTrialRecord:
    def test_json_round_trip(self):
        record = TrialRecord(
            algorithm="ud25", dataset="blob", subset=2, seed=7,
            theta=HyperPoint(3.0, -4.5), alpha=0.925, beta=0.9,
            eval_count=25, wall_time=0.125, tie_set_size=2,
            tie_set=(HyperPoint(3.0, -4.5), HyperPoint(5.0, -6.0)),
            flags=("unconverged_folds:1",), unconverged_folds=1)
        assert TrialRecord.from_json_dict(record.to_json_dict()) == record

    def test_failed_round_trip(self):
        record = TrialRecord(
            algorithm="grid25", dataset="blob", subset=1, seed=0,
            theta=None, alpha=None, beta=None, eval_count=0,
            wall_time=0.01, tie_set_size=0, flags=("time_limit",))
        restored = TrialRecord.from_json_dict(record.to_json_dict())
        assert restored == record
        assert restored.theta is None

    @pytest.mark.parametrize("flags,failed", [
        ((), False),
        (("unconverged_folds:2",), False),
        (("time_limit",), True),
        (("error:ValueError:bad",), True),
        (("unconverged_folds:1", "time_limit"), True),
    ])
    def test_failed_property(self, flags, failed):
        record = synthetic_record("grid25", "d", 1, flags=flags)
        assert record.failed is failed

    def test_key(self):
        record = synthetic_record("ud25", "blob", 2, seed=5)
        assert record.key() == ("ud25", "blob", 2, 5)


@pytest.fixture(scope="module")
def trial():
    ds = blob_dataset()
    plan = make_split_plan(ds, 5, 17)
    return run_trial("grid25", ds, plan, 1, 4)


@pytest.fixture(scope="module")
def campaign(tmp_path_factory):
    path = tmp_path_factory.mktemp("camp") / "trials.jsonl"
    ds = blob_dataset()
    records = run_campaign([ds], ["grid25", "rand25"], records_path=path,
                           seed_split=17, seed_search=4)
    return path, ds, records


class TestRunTrial:
    def test_success_fields(self, trial):
        assert trial.algorithm == "grid25"
        assert trial.dataset == "blob"
        assert (trial.subset, trial.seed) == (1, 4)
        assert trial.eval_count == 25
        assert 0.0 <= trial.alpha <= 1.0
        assert 0.0 <= trial.beta <= 1.0
        assert trial.wall_time > 0.0
        assert not trial.failed

    def test_theta_comes_from_tie_set(self, trial):
        assert trial.theta in trial.tie_set
        assert trial.tie_set_size == len(trial.tie_set) >= 1

    def test_time_limit_flag(self):
        ds = blob_dataset()
        plan = make_split_plan(ds, 5, 17)
        record = run_trial("grid25", ds, plan, 1, 4, time_limit_secs=0.0)
        assert record.flags == ("time_limit",)
        assert record.failed
        assert record.theta is None and record.alpha is None
        assert record.eval_count == 0

    def test_error_flag_captures_type_and_message(self):
        ds = blob_dataset()
        plan = make_split_plan(ds, 5, 17)
        record = run_trial("grid25", ds, plan, 1, 4, selection_rule="bogus")
        assert record.failed
        assert record.flags[0].startswith("error:ValueError:")
        assert "bogus" in record.flags[0]


class TestPersistence:
    def test_append_and_load(self, tmp_path):
        path = tmp_path / "sub" / "trials.jsonl"
        records = [synthetic_record("grid25", "d1", s) for s in (1, 2)]
        for record in records:
            append_record(path, record)
        assert load_records(path) == records
        assert len(path.read_text().strip().splitlines()) == 2

    def test_load_missing_file(self, tmp_path):
        assert load_records(tmp_path / "absent.jsonl") == []

    def test_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "trials.jsonl"
        record = synthetic_record("grid25", "d1", 1)
        path.write_text(json.dumps(record.to_json_dict()) + "\n\n")
        assert load_records(path) == [record]


class TestRunCampaign:
    def test_full_grid_of_trials(self, campaign):
        path, _, records = campaign
        assert len(records) == 4
        keys = {r.key() for r in records}
        assert keys == {(a, "blob", s, 4)
                        for a in ("grid25", "rand25") for s in (1, 2)}
        assert len(path.read_text().strip().splitlines()) == 4

    def test_rerun_adds_nothing(self, campaign):
        path, ds, records = campaign
        before = path.read_text()
        again = run_campaign([ds], ["grid25", "rand25"], records_path=path,
                             seed_split=17, seed_search=4)
        assert path.read_text() == before
        assert again == records

    def test_partial_resume_recomputes_missing(self, campaign, tmp_path):
        path, ds, records = campaign
        partial = tmp_path / "trials.jsonl"
        lines = path.read_text().strip().splitlines()
        partial.write_text("\n".join(lines[:2]) + "\n")
        resumed = run_campaign([ds], ["grid25", "rand25"],
                               records_path=partial, seed_split=17,
                               seed_search=4)
        assert self._strip_times(resumed) == self._strip_times(records)

    def test_threaded_matches_serial(self, campaign, tmp_path):
        path, ds, records = campaign
        threaded = run_campaign([ds], ["grid25", "rand25"],
                                records_path=tmp_path / "t.jsonl",
                                seed_split=17, seed_search=4, jobs=2)
        assert self._strip_times(threaded) == self._strip_times(records)

    @staticmethod
    def _strip_times(records):
        return [dataclasses.replace(r, wall_time=0.0) for r in records]


class TestGains:
    @pytest.fixture()
    def records(self):
        return [
            synthetic_record(BASELINE_ALGORITHM, "d1", 1, alpha=0.8, beta=0.7,
                             eval_count=100, wall_time=1.0),
            synthetic_record(BASELINE_ALGORITHM, "d1", 2, alpha=0.9, beta=0.8,
                             eval_count=100, wall_time=1.0),
            synthetic_record("ud25", "d1", 1, alpha=0.85, beta=0.75,
                             eval_count=25, wall_time=0.25),
            synthetic_record("ud25", "d1", 2, alpha=0.95, beta=0.95,
                             eval_count=25, wall_time=0.25),
        ]

    def test_two_fold_means(self, records):
        assert mean_best_accuracy(records, BASELINE_ALGORITHM, "d1") == \
            pytest.approx(0.85)
        assert future_accuracy(records, "ud25", "d1") == pytest.approx(0.85)

    def test_gains_against_baseline(self, records):
        assert accuracy_gain(records, "ud25", "d1") == pytest.approx(0.05)
        assert future_gain(records, "ud25", "d1") == pytest.approx(0.10)
        assert accuracy_gain(records, BASELINE_ALGORITHM, "d1") == 0.0

    def test_cost_ratio(self, records):
        time_ratio, eval_ratio = cost_ratio(records, "ud25", "d1")
        assert time_ratio == pytest.approx(0.25)
        assert eval_ratio == pytest.approx(0.25)

    def test_cost_ratio_zero_baseline(self, records):
        for r in records[:2]:
            r.wall_time = 0.0
        with pytest.raises(ValueError, match="zero baseline time"):
            cost_ratio(records, "ud25", "d1")

    def test_missing_record_raises(self, records):
        with pytest.raises(ValueError, match="missing record"):
            mean_best_accuracy(records, "grid400", "d1")
        with pytest.raises(ValueError, match="missing record"):
            mean_best_accuracy(records[:3], "ud25", "d1")

    def test_flagged_record_raises(self, records):
        records[2].flags = ("time_limit",)
        with pytest.raises(ValueError, match="flagged"):
            future_gain(records, "ud25", "d1")

    def test_gain_table_skips_bad_pairs(self, records):
        records = records + [
            synthetic_record("sa25", "d1", 1, flags=("time_limit",)),
            synthetic_record("sa25", "d1", 2),
        ]
        rows = gain_table(records)
        assert {row["algorithm"] for row in rows} == {BASELINE_ALGORITHM,
                                                      "ud25"}
        baseline_row = next(r for r in rows
                            if r["algorithm"] == BASELINE_ALGORITHM)
        assert baseline_row["accgain"] == 0.0
        assert baseline_row["eval_ratio"] == 1.0

    def test_write_gain_csv(self, records, tmp_path):
        rows = gain_table(records)
        path = tmp_path / "gains.csv"
        write_gain_csv(path, rows)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == ",".join(GAIN_COLUMNS)
        assert len(lines) == 1 + len(rows)
        first = dict(zip(GAIN_COLUMNS, lines[1].split(",")))
        assert first["algorithm"] == BASELINE_ALGORITHM
        assert float(first["accgain"]) == 0.0


class TestStability:
    def test_identical_fold_seeds_agree(self):
        ds = blob_dataset(n=30, seed=9)
        report = two_run_stability("grid25", [ds], (5, 5), seed_split=2,
                                   seed_search=0)
        assert report.n_cases == 2
        assert report.median_cross_run_best_gap == 0.0
        assert report.mean_log_distance == 0.0
        assert report.same_best_proportion == 1.0
        assert report.mean_cross_run_rank >= 1.0

    def test_different_fold_seeds_measurable(self):
        datasets = [blob_dataset(name=f"b{i}", n=30, seed=i, separation=2.0)
                    for i in (1, 2)]
        report = two_run_stability("grid25", datasets, (5, 6), seed_split=2,
                                   seed_search=0)
        assert report.algorithm == "grid25"
        assert report.n_cases == 4
        assert 0 <= report.n_single_best <= 4
        assert 0.0 <= report.same_best_proportion <= 1.0
        assert report.mean_cross_run_rank >= 1.0
        assert report.median_best_second_gap >= 0.0
        assert report.median_cross_run_best_gap >= 0.0
        assert report.mean_log_distance >= 0.0

    def test_rejects_adaptive_searcher(self):
        ds = blob_dataset()
        with pytest.raises(ValueError, match="predetermined probes"):
            two_run_stability("sa25", [ds], (5, 6), seed_split=2,
                              seed_search=0)

    def test_csv_round_trip(self, tmp_path):
        report = StabilityReport(
            algorithm="ud100", n_cases=8, n_single_best=5,
            same_best_proportion=0.8, mean_cross_run_rank=2.125,
            median_best_second_gap=0.0125, median_cross_run_best_gap=0.025,
            mean_log_distance=1.75)
        path = tmp_path / "stability.csv"
        write_stability_csv(path, report)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "algorithm,n_cases,measurement,value"
        assert len(lines) == 7
        assert [line.split(",")[2] for line in lines[1:]] == \
            list(STABILITY_MEASUREMENTS)
        assert read_stability_csv(path) == report

    def test_read_rejects_other_csv(self, tmp_path):
        path = tmp_path / "other.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError, match="not a stability report"):
            read_stability_csv(path)


class TestSelectionCases:
    def test_cases_filter_and_score(self):
        ds = blob_dataset()
        tie = (HyperPoint(0.0, -5.0), HyperPoint(5.0, -5.0))
        good = TrialRecord(
            algorithm="grid25", dataset="blob", subset=1, seed=0,
            theta=tie[0], alpha=0.9, beta=0.9, eval_count=25, wall_time=0.1,
            tie_set_size=2, tie_set=tie)
        singleton = synthetic_record("ud25", "blob", 2)
        flagged = dataclasses.replace(good, subset=2, flags=("time_limit",))
        cases = selection_cases_from_records(
            [good, singleton, flagged], {"blob": ds}, seed_split=17)
        assert len(cases) == 1
        case = cases[0]
        assert tuple(case.tie_set.pairs) == tie
        score = case.future_accuracy(tie[0])
        assert 0.0 <= score <= 1.0
        assert case.future_accuracy(tie[0]) == score
