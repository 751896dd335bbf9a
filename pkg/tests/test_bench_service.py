"""
Tests for the benchmark runner, timing sweeps and decision-boundary export.
"""
import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from app.core.config import settings
from app.core.errors import ConfigError, DimensionalityError
from app.schemas.aggregation import AggregatorConfig, EstimatorKind
from app.schemas.bench import BenchConfig, RunRecord, TimingSweep
from app.schemas.datagen import GeneratorKind, GeneratorSpec
from app.services.aggregation_service import CobraAggregator
from app.services.bench_service import (
    _time_per_query,
    export_decision_boundary,
    export_machine_boundaries,
    load_bench_config,
    run_rmse_benchmark,
    run_seed,
    run_timing_benchmark,
    summarize,
    train_test_split,
    write_report,
    write_timing_table,
)
from app.services.datagen_service import generate, reference_labels, write_csv

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def _config(**overrides) -> BenchConfig:
    raw = {
        "datasets": [{"name": "linear",
                      "generator": {"kind": "linear-gaussian", "n": 120, "d": 4, "noise": 0.0}}],
        "estimators": [
            {"name": "kernelcobra", "kind": "kernelcobra", "config": {"lambda": 1.0}},
            {"name": "kernelcobra-tuned", "kind": "kernelcobra",
             "tune": [{"parameter": "lambda", "values": [0.0, 1.0, 10.0]}]},
        ],
        "machines": [
            {"kind": "ridge", "hyperparameters": {"regularization": 0.0}},
            {"kind": "knn", "hyperparameters": {"n_neighbors": 5}},
        ],
        "runs": 3,
        "folds": 2,
        "seed": 11,
    }
    raw.update(overrides)
    return BenchConfig.model_validate(raw)


class ConstantClassifier:
    n_features = 2

    def predict_batch(self, X):
        return np.zeros(X.shape[0], dtype=np.int64)


class TestBenchConfig:
    """Test cases for loading bench configs."""

    def test_load(self, tmp_path):
        """A JSON file validates into a BenchConfig."""
        path = tmp_path / "bench.json"
        path.write_text(_config().model_dump_json(by_alias=True), encoding="utf-8")
        config = load_bench_config(path)
        assert config.runs == 3
        assert config.estimators[0].config.lambda_ == 1.0

    def test_seed_override(self, tmp_path, monkeypatch):
        """COBRA_SEED replaces the configured seed."""
        path = tmp_path / "bench.json"
        path.write_text(_config().model_dump_json(by_alias=True), encoding="utf-8")
        monkeypatch.setattr(settings, "COBRA_SEED", 99)
        assert load_bench_config(path).seed == 99

    def test_missing_and_invalid_files(self, tmp_path):
        """Missing files, bad JSON and schema violations are config errors."""
        with pytest.raises(ConfigError):
            load_bench_config(tmp_path / "absent.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_bench_config(bad)
        bad.write_text(json.dumps({"datasets": [], "estimators": []}), encoding="utf-8")
        with pytest.raises(ConfigError):
            load_bench_config(bad)

    def test_missing_csv(self, tmp_path):
        """A dataset pointing at a missing CSV is rejected up front."""
        path = tmp_path / "bench.json"
        raw = json.loads(_config().model_dump_json(by_alias=True))
        raw["datasets"] = [{"name": "file", "csv_path": "nowhere.csv"}]
        path.write_text(json.dumps(raw), encoding="utf-8")
        with pytest.raises(ConfigError):
            load_bench_config(path)

    @pytest.mark.parametrize("name", ["regression.json", "classification.json"])
    def test_shipped_configs(self, name):
        """The configs under configs/ validate."""
        config = BenchConfig.from_file(CONFIG_DIR / name)
        assert config.runs == 20
        if name == "classification.json":
            assert all(source.task == "classification" for source in config.datasets)

    def test_dataset_needs_one_source(self):
        """Exactly one of generator and csv_path."""
        with pytest.raises(ValueError):
            _config(datasets=[{"name": "none"}])


class TestHelpers:
    """Test cases for seeds, splits and summaries."""

    def test_run_seeds(self):
        """Runs get distinct derived seeds unless reuse_seed is set."""
        config = _config()
        assert len({run_seed(config, run) for run in range(5)}) == 5
        reused = _config(reuse_seed=True)
        assert {run_seed(reused, run) for run in range(5)} == {11}

    def test_train_test_split(self, friedman_data):
        """A quarter of the rows go to the test part, disjoint from training."""
        train, test = train_test_split(friedman_data, 0.25, seed=0)
        assert (train.n, test.n) == (150, 50)
        assert not set(train.index) & set(test.index)

    def test_summarize(self):
        """Mean and population std per model; the lowest mean is best."""
        runs = [
            RunRecord(dataset="a", run=0, seed=1, rmse={"x": 1.0, "y": 2.0}),
            RunRecord(dataset="a", run=1, seed=2, rmse={"x": 3.0, "y": 2.5}),
        ]
        rows = {row.model: row for row in summarize(runs, ["a", "empty"])}
        assert rows["x"].mean_rmse == 2.0
        assert rows["x"].std_rmse == 1.0
        assert rows["y"].mean_rmse == 2.25
        assert rows["y"].best and not rows["x"].best
        assert all(row.dataset == "a" for row in rows.values())


class TestRmseBenchmark:
    """Test cases for run_rmse_benchmark and write_report."""

    def test_noise_free_linear(self):
        """Unpenalised ridge is exact on noise-free linear data, and every model is reported."""
        report = run_rmse_benchmark(_config())
        assert not report.failures
        assert len(report.runs) == 3
        for record in report.runs:
            assert record.rmse["ridge"] <= 1e-6
            assert set(record.rmse) == {"kernelcobra", "kernelcobra-tuned", "ridge", "knn"}
            assert set(record.tuned_params) == {"kernelcobra-tuned"}
        assert {row.model for row in report.summary} == {"kernelcobra", "kernelcobra-tuned", "ridge", "knn"}
        assert [(p.dataset, p.run) for p in report.predictions] == [("linear", 0), ("linear", 1), ("linear", 2)]
        for record, predictions in zip(report.runs, report.predictions):
            assert len(predictions.y_true) == 30
            for model, values in predictions.predictions.items():
                errors = np.abs(np.asarray(values) - predictions.y_true)
                np.testing.assert_allclose(predictions.abs_errors[model], errors, rtol=0, atol=1e-12)
                assert record.rmse[model] == pytest.approx(np.sqrt(np.mean(errors ** 2)), abs=1e-12)

    def test_summary_matches_runs(self):
        """Summary means and stds are recomputable from the per-run losses."""
        report = run_rmse_benchmark(_config())
        for row in report.summary:
            values = [r.rmse[row.model] for r in report.runs]
            assert row.mean_rmse == pytest.approx(np.mean(values), abs=1e-12)
            assert row.std_rmse == pytest.approx(np.std(values), abs=1e-12)
            assert row.n_runs == 3

    def test_reuse_seed_repeats_the_run(self):
        """With reuse_seed every run is the same experiment."""
        report = run_rmse_benchmark(_config(reuse_seed=True))
        for row in report.summary:
            assert row.std_rmse == pytest.approx(0.0, abs=1e-12)
        assert {r.seed for r in report.runs} == {11}

    def test_reports_are_reproducible(self, tmp_path):
        """Two runs with the same config write byte-identical reports."""
        first = write_report(run_rmse_benchmark(_config()), tmp_path / "first")
        second = write_report(run_rmse_benchmark(_config(n_jobs=2)), tmp_path / "second")
        for key in ("report", "summary", "runs", "point_errors", "predictions", "failures"):
            assert first[key].read_bytes() == second[key].read_bytes()
        assert "timings" not in json.loads(first["report"].read_text(encoding="utf-8"))
        assert len(json.loads(first["timings"].read_text(encoding="utf-8"))) == 3
        summary = pd.read_csv(first["summary"])
        assert list(summary.columns) == ["dataset", "model", "mean_rmse", "std_rmse", "n_runs", "best"]

    def test_error_and_prediction_tables(self, tmp_path):
        """point_errors.csv and predictions.csv cover every run and every model."""
        paths = write_report(run_rmse_benchmark(_config()), tmp_path)
        errors = pd.read_csv(paths["point_errors"])
        assert list(errors.columns) == ["dataset", "run", "model", "point", "abs_error"]
        assert sorted(errors["run"].unique()) == [0, 1, 2]
        assert len(errors) == 3 * 4 * 30
        predictions = pd.read_csv(paths["predictions"])
        assert list(predictions.columns) == ["dataset", "run", "point", "y_true",
                                             "kernelcobra", "kernelcobra-tuned", "ridge", "knn"]
        assert len(predictions) == 3 * 30
        np.testing.assert_allclose(predictions["ridge"], predictions["y_true"], atol=1e-6)

    def test_kernelcobra_on_friedman(self):
        """Tuned KernelCobra is within 10% of the best machine and beats tuned COBRA in most runs."""
        machines = ["ridge", "lasso", "decision-tree", "random-forest"]
        config = _config(
            datasets=[{"name": "friedman",
                       "generator": {"kind": "friedman1", "n": 800, "d": 10, "noise": 1.0}}],
            estimators=[
                {"name": "cobra", "kind": "cobra", "config": {"uniform_fallback": True}, "use_default_grids": True},
                {"name": "kernelcobra", "kind": "kernelcobra", "use_default_grids": True},
            ],
            machines=[{"kind": "ridge"}, {"kind": "lasso"}, {"kind": "decision-tree"},
                      {"kind": "random-forest", "hyperparameters": {"n_trees": 20}}],
            runs=5,
            folds=3,
            seed=42,
        )
        report = run_rmse_benchmark(config)
        assert not report.failures
        means = {row.model: row.mean_rmse for row in report.summary}
        assert means["kernelcobra"] <= 1.10 * min(means[name] for name in machines)
        wins = sum(r.rmse["kernelcobra"] <= r.rmse["cobra"] for r in report.runs)
        assert wins >= 0.6 * len(report.runs)

    def test_failures_are_recorded(self):
        """A run that raises is reported with its seed and error type."""
        config = _config(estimators=[{"name": "cobra", "kind": "cobra", "config": {"epsilon": 1e-9}}], runs=2)
        report = run_rmse_benchmark(config)
        assert report.runs == [] and report.summary == []
        assert [f.run for f in report.failures] == [0, 1]
        assert all(f.error_type == "NoConsensusError" for f in report.failures)
        assert report.failures[0].seed == run_seed(config, 0)

    def test_csv_dataset(self, tmp_path, linear_data):
        """A CSV source is read once and reused across runs."""
        path = write_csv(linear_data, tmp_path / "linear.csv")
        config = _config(datasets=[{"name": "file", "csv_path": str(path)}], runs=2)
        report = run_rmse_benchmark(config)
        assert not report.failures
        assert [r.dataset for r in report.runs] == ["file", "file"]

    def test_classification_dataset(self):
        """Classification datasets are scored by misclassification rate."""
        config = _config(
            datasets=[{"name": "moons", "generator": {"kind": "moons", "n": 200, "noise": 0.2}}],
            estimators=[{"name": "classifier", "kind": "classifier", "config": {"lambda": 5.0}}],
            machines=[{"kind": "knn-classifier"}, {"kind": "decision-tree-classifier"}],
            runs=1,
        )
        report = run_rmse_benchmark(config)
        assert not report.failures
        assert 0.0 <= report.runs[0].rmse["classifier"] <= 0.3


class TestTimingBenchmark:
    """Test cases for run_timing_benchmark."""

    def test_rows(self, tmp_path):
        """One row per sweep value and timed estimator."""
        config = _config(machines=[{"kind": "ridge"}])
        rows = run_timing_benchmark(config, TimingSweep.parse("ell=20,40"), repetitions=2, n_queries=5)
        assert [(r.value, r.estimator) for r in rows] == [
            (20, "cobra"), (20, "kernelcobra"), (20, "mixcobra"),
            (40, "cobra"), (40, "kernelcobra"), (40, "mixcobra"),
        ]
        assert all(r.aggregation_median > 0 and r.end_to_end_median > 0 for r in rows)
        path = write_timing_table(rows, tmp_path / "timing.csv")
        assert len(pd.read_csv(path)) == 6

    def test_machine_sweep(self):
        """Sweeping the machine count fits that many machines."""
        config = _config(machines=[{"kind": "ridge"}])
        rows = run_timing_benchmark(config, TimingSweep(variable="machines", values=[3]), repetitions=1,
                                    n_queries=3, base_ell=20, base_d=5)
        assert len(rows) == 3

    def test_mixcobra_pays_for_the_input_dimension(self):
        """At large d the input-space baseline is slower per query than KernelCobra."""
        config = _config(machines=[{"kind": "ridge"}])
        rows = run_timing_benchmark(config, TimingSweep(variable="d", values=[1000]), repetitions=3,
                                    n_queries=10, base_ell=400)
        by_estimator = {r.estimator: r for r in rows}
        assert by_estimator["mixcobra"].aggregation_median > by_estimator["kernelcobra"].aggregation_median

    def test_dimension_below_five_is_rejected(self):
        """Friedman #1 needs d >= 5: small sweep values and base_d are refused, not silently raised."""
        with pytest.raises(ValueError):
            TimingSweep.parse("d=3,10")
        with pytest.raises(ConfigError):
            run_timing_benchmark(_config(machines=[{"kind": "ridge"}]), TimingSweep.parse("ell=20"),
                                 repetitions=1, n_queries=2, base_d=3)

    def test_each_measurement_is_warmed_up(self):
        """The timed callable runs once untimed before the timed repetitions."""
        calls = []
        median, spread = _time_per_query(lambda: calls.append(1), n_queries=4, repetitions=3)
        assert len(calls) == 4
        assert median >= 0 and spread >= 0

    def test_kernelcobra_is_flat_in_d_while_mixcobra_grows(self):
        """With the matrix cached, KernelCobra's aggregation time does not depend on d; MixCobra's does."""
        config = _config(machines=[{"kind": "ridge"}, {"kind": "ridge", "hyperparameters": {"regularization": 10.0}}])
        rows = run_timing_benchmark(config, TimingSweep.parse("d=10,100,1000"), repetitions=7, n_queries=20,
                                    base_ell=2000)
        kernelcobra = [r.aggregation_median for r in rows if r.estimator == "kernelcobra"]
        mixcobra = [r.aggregation_median for r in rows if r.estimator == "mixcobra"]
        assert max(kernelcobra) / min(kernelcobra) <= 2.0
        assert mixcobra[0] < mixcobra[1] < mixcobra[2]
        assert mixcobra[2] >= 3 * mixcobra[0]

    @pytest.mark.parametrize("sweep,base_ell", [("ell=8000,16000,32000,64000", 300),
                                                ("machines=2,4,8,16", 20000)])
    def test_kernelcobra_time_is_linear(self, sweep, base_ell):
        """Each doubling of ell or M multiplies KernelCobra's aggregation time by roughly two."""
        config = _config(machines=[{"kind": "ridge"}, {"kind": "ridge", "hyperparameters": {"regularization": 10.0}}])
        rows = run_timing_benchmark(config, TimingSweep.parse(sweep), repetitions=7, n_queries=20, base_d=5,
                                    base_ell=base_ell)
        times = [r.aggregation_median for r in rows if r.estimator == "kernelcobra"]
        factors = [later / earlier for earlier, later in zip(times, times[1:])]
        assert all(1.2 <= factor <= 3.5 for factor in factors), factors

    def test_sweep_parse(self):
        """name=v1,v2 parses; unknown variables are refused."""
        assert TimingSweep.parse("d=10,100").values == [10, 100]
        with pytest.raises(ValueError):
            TimingSweep.parse("n=10")


class TestDecisionBoundary:
    """Test cases for export_decision_boundary."""

    def test_constant_classifier_grid(self, tmp_path):
        """A 3 x 3 grid of a constant classifier, x2 varying fastest."""
        path = tmp_path / "grid.csv"
        frame = export_decision_boundary(ConstantClassifier(), ((0.0, 1.0), (10.0, 12.0)), 3, path)
        assert list(frame.columns) == ["x1", "x2", "label"]
        assert frame["x1"].tolist() == [0.0, 0.0, 0.0, 0.5, 0.5, 0.5, 1.0, 1.0, 1.0]
        assert frame["x2"].tolist() == [10.0, 11.0, 12.0] * 3
        assert frame["label"].tolist() == [0] * 9
        assert pd.read_csv(path).shape == (9, 3)

    def test_requires_two_features(self):
        """Only 2-d classifiers have a decision boundary."""
        classifier = ConstantClassifier()
        classifier.n_features = 3
        with pytest.raises(DimensionalityError):
            export_decision_boundary(classifier, ((0.0, 1.0), (0.0, 1.0)), 3)

    def test_resolution(self):
        """At least two points per axis."""
        with pytest.raises(ValueError):
            export_decision_boundary(ConstantClassifier(), ((0.0, 1.0), (0.0, 1.0)), 1)

    def test_moons_boundary(self, fast_classification_roster):
        """The aggregated classifier recovers most of the moons regions."""
        data = generate(GeneratorSpec(kind=GeneratorKind.MOONS, n=400, noise=0.1, seed=5))
        classifier = CobraAggregator.fit(EstimatorKind.CLASSIFIER, AggregatorConfig(lambda_=5.0), data,
                                         fast_classification_roster, seed=0)
        frame = export_decision_boundary(classifier, ((-1.0, 2.0), (-0.5, 1.0)), 30)
        expected = reference_labels(GeneratorKind.MOONS, frame[["x1", "x2"]].to_numpy())
        assert np.mean(frame["label"].to_numpy() == expected) >= 0.8

    def test_one_grid_per_machine(self, tmp_path, fast_classification_roster):
        """Each machine's grid is written next to the aggregate's and matches that machine."""
        data = generate(GeneratorSpec(kind=GeneratorKind.MOONS, n=200, noise=0.1, seed=5))
        classifier = CobraAggregator.fit(EstimatorKind.CLASSIFIER, AggregatorConfig(lambda_=5.0), data,
                                         fast_classification_roster, seed=0)
        paths = export_machine_boundaries(classifier, ((-1.0, 2.0), (-0.5, 1.0)), 4, tmp_path / "grid.csv")
        assert list(paths) == [m.name for m in classifier.machines]
        assert paths["naive-bayes"] == tmp_path / "grid_naive-bayes.csv"
        for machine in classifier.machines:
            frame = pd.read_csv(paths[machine.name])
            np.testing.assert_array_equal(frame["label"],
                                          machine.predict_batch(frame[["x1", "x2"]].to_numpy()))
