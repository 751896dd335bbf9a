"""
Tests for the command-line interface.
"""
import json

import pandas as pd
import pytest
from typer.testing import CliRunner

from app.cli import app
from app.core.config import settings
from app.services.model_service import load_model

runner = CliRunner()


def invoke(*args):
    return runner.invoke(app, ["--log-level", "ERROR", *map(str, args)])


@pytest.fixture
def friedman_csv(tmp_path):
    path = tmp_path / "friedman.csv"
    result = invoke("gen", "friedman1", "--n", 120, "--d", 5, "--noise", 0.5, "--seed", 3, "--out", path)
    assert result.exit_code == 0
    return path


def _bench_config(tmp_path, **overrides):
    raw = {
        "datasets": [{"name": "friedman", "generator": {"kind": "friedman1", "n": 100, "d": 5, "noise": 0.5}}],
        "estimators": [{"name": "kernelcobra", "kind": "kernelcobra", "config": {"lambda": 0.5}}],
        "machines": [{"kind": "ridge"}, {"kind": "knn"}],
        "runs": 2,
        "output_dir": str(tmp_path / "out"),
    }
    raw.update(overrides)
    path = tmp_path / "bench.json"
    path.write_text(json.dumps(raw), encoding="utf-8")
    return path


class TestGen:
    """Test cases for `cobra gen`."""

    def test_writes_csv(self, friedman_csv):
        """The CSV has a header x1..xd,y and n rows."""
        frame = pd.read_csv(friedman_csv)
        assert list(frame.columns) == ["x1", "x2", "x3", "x4", "x5", "y"]
        assert len(frame) == 120

    def test_invalid_spec(self, tmp_path):
        """Friedman #1 below five dimensions is an input error."""
        result = invoke("gen", "friedman1", "--n", 10, "--d", 3, "--out", tmp_path / "x.csv")
        assert result.exit_code == 1

    def test_seed_override(self, tmp_path, monkeypatch):
        """COBRA_SEED wins over --seed."""
        monkeypatch.setattr(settings, "COBRA_SEED", 5)
        invoke("gen", "moons", "--n", 20, "--noise", 0.1, "--seed", 1, "--out", tmp_path / "a.csv")
        invoke("gen", "moons", "--n", 20, "--noise", 0.1, "--seed", 2, "--out", tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


class TestFitPredict:
    """Test cases for `cobra fit` and `cobra predict`."""

    def test_round_trip(self, tmp_path, friedman_csv):
        """A fitted model predicts one value per input row."""
        model_dir = tmp_path / "model"
        result = invoke("fit", "--data", friedman_csv, "--model-dir", model_dir, "--machine", "ridge",
                        "--machine", "knn", "--lambda", 0.5, "--seed", 0)
        assert result.exit_code == 0, result.output
        assert (model_dir / "model.joblib").is_file()

        result = invoke("predict", "--model-dir", model_dir, "--input", friedman_csv)
        assert result.exit_code == 0, result.output
        values = [float(line) for line in result.stdout.strip().splitlines()]
        assert len(values) == 120

    def test_fit_with_tuning(self, tmp_path, friedman_csv):
        """--tune runs the default grid search before fitting."""
        result = invoke("fit", "--data", friedman_csv, "--model-dir", tmp_path / "model", "--machine", "ridge",
                        "--tune", "--folds", 2)
        assert result.exit_code == 0, result.output
        assert "Tuned parameters" in result.stdout

    def test_bad_split_size(self, tmp_path, friedman_csv):
        """A split size outside [1, n - 1] is an input error."""
        result = invoke("fit", "--data", friedman_csv, "--model-dir", tmp_path / "model", "--machine", "ridge",
                        "--k", 0)
        assert result.exit_code == 1
        assert "k=0" in result.output

    def test_alpha_above_machine_count(self, tmp_path, friedman_csv):
        """COBRA with alpha larger than the roster is an input error."""
        result = invoke("fit", "--data", friedman_csv, "--model-dir", tmp_path / "model", "--estimator", "cobra",
                        "--machine", "ridge", "--machine", "knn", "--epsilon", 1.0, "--alpha", 9)
        assert result.exit_code == 1
        assert not (tmp_path / "model").exists()

    def test_alpha_is_saved(self, tmp_path, friedman_csv):
        """--alpha reaches the saved COBRA config."""
        model_dir = tmp_path / "model"
        result = invoke("fit", "--data", friedman_csv, "--model-dir", model_dir, "--estimator", "cobra",
                        "--machine", "ridge", "--machine", "knn", "--epsilon", 1.0, "--alpha", 1)
        assert result.exit_code == 0, result.output
        assert load_model(model_dir).config.alpha == 1

    def test_missing_data(self, tmp_path):
        """A missing CSV is an input error."""
        result = invoke("fit", "--data", tmp_path / "absent.csv", "--model-dir", tmp_path / "model")
        assert result.exit_code == 1

    def test_missing_model(self, tmp_path, friedman_csv):
        """Predicting without a saved model is an input error."""
        result = invoke("predict", "--model-dir", tmp_path / "none", "--input", friedman_csv)
        assert result.exit_code == 1


class TestTune:
    """Test cases for `cobra tune`."""

    def test_prints_result(self, tmp_path, friedman_csv):
        """The search result is printed as JSON and the table written as CSV."""
        table = tmp_path / "table.csv"
        result = invoke("tune", "--data", friedman_csv, "--grid", "lambda=0,0.5,5", "--machine", "ridge",
                        "--machine", "knn", "--folds", 3, "--table", table)
        assert result.exit_code == 0, result.output
        body = json.loads(result.stdout)
        assert set(body["best_params"]) == {"lambda"}
        assert len(body["candidates"]) == 3
        assert len(pd.read_csv(table)) == 3

    def test_bad_grid(self, friedman_csv):
        """A malformed grid is an input error."""
        result = invoke("tune", "--data", friedman_csv, "--grid", "lambda")
        assert result.exit_code == 1

    def test_all_infeasible(self, friedman_csv):
        """No feasible candidate is a runtime error."""
        result = invoke("tune", "--data", friedman_csv, "--estimator", "cobra", "--grid", "epsilon=1e-9",
                        "--machine", "ridge", "--folds", 2)
        assert result.exit_code == 2


class TestBench:
    """Test cases for the bench commands."""

    def test_rmse(self, tmp_path):
        """The RMSE benchmark writes its report files."""
        result = invoke("bench", "rmse", "--config", _bench_config(tmp_path))
        assert result.exit_code == 0, result.output
        for name in ("report.json", "summary.csv", "runs.csv", "point_errors.csv", "predictions.csv", "failures.json"):
            assert (tmp_path / "out" / name).is_file()
        assert "kernelcobra" in result.stdout

    def test_rmse_with_failures(self, tmp_path):
        """Failed runs give exit code 2 and are still reported."""
        path = _bench_config(tmp_path, estimators=[{"name": "cobra", "kind": "cobra",
                                                    "config": {"epsilon": 1e-9}}])
        result = invoke("bench", "rmse", "--config", path)
        assert result.exit_code == 2
        failures = json.loads((tmp_path / "out" / "failures.json").read_text(encoding="utf-8"))
        assert len(failures) == 2

    def test_bad_config(self, tmp_path):
        """A missing config is an input error."""
        assert invoke("bench", "rmse", "--config", tmp_path / "absent.json").exit_code == 1

    def test_timing(self, tmp_path):
        """The timing sweep writes one row per value and estimator."""
        out = tmp_path / "timing.csv"
        result = invoke("bench", "timing", "--sweep", "ell=10,20", "--config", _bench_config(tmp_path),
                        "--repetitions", 1, "--queries", 3, "--out", out)
        assert result.exit_code == 0, result.output
        assert len(pd.read_csv(out)) == 6

    def test_bad_sweep(self, tmp_path):
        """Unknown sweep variables are input errors."""
        result = invoke("bench", "timing", "--sweep", "n=10", "--config", _bench_config(tmp_path))
        assert result.exit_code == 1

    def test_boundary(self, tmp_path):
        """A 2-d classification CSV gives a resolution x resolution grid."""
        data = tmp_path / "moons.csv"
        invoke("gen", "moons", "--n", 80, "--noise", 0.1, "--seed", 0, "--out", data)
        out = tmp_path / "grid.csv"
        result = invoke("bench", "boundary", "--data", data, "--out", out, "--resolution", 5)
        assert result.exit_code == 0, result.output
        frame = pd.read_csv(out)
        assert len(frame) == 25
        assert set(frame["label"]) <= {0, 1}

    def test_boundary_per_machine(self, tmp_path):
        """--machines adds one grid file per machine of the default roster."""
        data = tmp_path / "moons.csv"
        invoke("gen", "moons", "--n", 80, "--noise", 0.1, "--seed", 0, "--out", data)
        result = invoke("bench", "boundary", "--data", data, "--out", tmp_path / "grid.csv", "--resolution", 4,
                        "--machines")
        assert result.exit_code == 0, result.output
        for name in ("knn-classifier", "decision-tree-classifier", "logistic-regression", "naive-bayes"):
            assert len(pd.read_csv(tmp_path / f"grid_{name}.csv")) == 16

    def test_boundary_needs_two_dimensions(self, tmp_path, friedman_csv):
        """A 5-d dataset has no decision grid."""
        labelled = tmp_path / "labelled.csv"
        frame = pd.read_csv(friedman_csv)
        frame["y"] = (frame["y"] > frame["y"].median()).astype(int)
        frame.to_csv(labelled, index=False)
        result = invoke("bench", "boundary", "--data", labelled, "--out", tmp_path / "grid.csv")
        assert result.exit_code == 1
