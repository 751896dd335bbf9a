"""
Command-line interface: dataset generation, fitting, prediction, tuning and benchmarks.

Exit codes: 0 on success, 1 for configuration and input errors (any ValueError,
such as a bad split size or alpha), 2 for runtime errors (no consensus, failing
machines, benchmarks with failed runs).
"""
import functools
import logging
from pathlib import Path
from typing import List, Optional

import pandas as pd
import typer
from pydantic import ValidationError

from app.core.config import settings
from app.core.errors import CobraError, ConfigError
from app.core.logging import configure_logging
from app.schemas.aggregation import AggregatorConfig, EstimatorKind
from app.schemas.bench import TimingSweep
from app.schemas.datagen import GeneratorKind
from app.schemas.machine import MachineKind, MachineSpec
from app.schemas.tuning import GridSpec
from app.services.aggregation_service import CobraAggregator
from app.services.bench_service import (
    export_decision_boundary,
    export_machine_boundaries,
    load_bench_config,
    run_rmse_benchmark,
    run_timing_benchmark,
    write_report,
    write_timing_table,
)
from app.services.datagen_service import generate, load_csv, load_features, make_spec, write_csv
from app.services.machine_service import default_classification_roster, default_regression_roster
from app.services.model_service import load_model, save_model
from app.services.tuning_service import apply_params, grid_search

logger = logging.getLogger(__name__)

app = typer.Typer(help="Consensus-based aggregation of machine predictions.", no_args_is_help=True)
bench_app = typer.Typer(help="Benchmarks: RMSE tables, timing sweeps, decision boundaries.", no_args_is_help=True)
app.add_typer(bench_app, name="bench")

INPUT_ERRORS = (ConfigError, ValidationError, FileNotFoundError, ValueError)


def handle_errors(command):
    """Map library errors to exit codes 1 (input) and 2 (runtime)."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except typer.Exit:
            raise
        except INPUT_ERRORS as e:
            typer.echo(f"Error: {e}", err=True)
            raise typer.Exit(code=1)
        except (CobraError, RuntimeError) as e:
            typer.echo(f"Error: {e}", err=True)
            raise typer.Exit(code=2)

    return wrapper


@app.callback()
def main_callback(
    log_level: str = typer.Option(settings.LOG_LEVEL, "--log-level", help="DEBUG, INFO, WARNING or ERROR"),
):
    configure_logging(log_level)


def _roster(machines: Optional[List[MachineKind]], estimator: EstimatorKind, seed: int) -> List[MachineSpec]:
    if machines:
        return [MachineSpec(kind=kind, seed=seed) for kind in machines]
    if estimator == EstimatorKind.CLASSIFIER:
        return default_classification_roster(seed)
    return default_regression_roster(seed)


def _load_config(path: Optional[Path], lambda_: Optional[float], epsilon: Optional[float],
                 alpha: Optional[int] = None) -> AggregatorConfig:
    if path is not None:
        if not path.is_file():
            raise ConfigError(f"Config file not found: {path}")
        config = AggregatorConfig.model_validate_json(path.read_text(encoding="utf-8"))
    else:
        config = AggregatorConfig()
    update = {}
    if lambda_ is not None:
        update["lambda_"] = lambda_
    if epsilon is not None:
        update["epsilon"] = epsilon
    if alpha is not None:
        update["alpha"] = alpha
    return AggregatorConfig.model_validate({**config.model_dump(), **update})


@app.command()
@handle_errors
def gen(
    kind: GeneratorKind = typer.Argument(..., help="Generator family"),
    n: int = typer.Option(600, "--n", help="Number of rows"),
    d: Optional[int] = typer.Option(None, "--d", help="Dimension (regression generators)"),
    noise: float = typer.Option(0.0, "--noise", help="Noise standard deviation"),
    seed: Optional[int] = typer.Option(None, "--seed"),
    out: Path = typer.Option(..., "--out", help="CSV file to write"),
):
    """Generate a synthetic dataset as CSV (header x1..xd,y)."""
    spec = make_spec(kind=kind, n=n, d=d, noise=noise, seed=settings.effective_seed(seed))
    write_csv(generate(spec), out)
    typer.echo(f"Wrote {n} rows to {out}")


@app.command()
@handle_errors
def fit(
    data: Path = typer.Option(..., "--data", help="Training CSV"),
    model_dir: Path = typer.Option(..., "--model-dir", help="Directory to write the model to"),
    estimator: EstimatorKind = typer.Option(EstimatorKind.KERNELCOBRA, "--estimator"),
    target: str = typer.Option("y", "--target", help="Target column"),
    machines: Optional[List[MachineKind]] = typer.Option(None, "--machine", help="Repeat to build the roster"),
    config_path: Optional[Path] = typer.Option(None, "--config", help="AggregatorConfig JSON"),
    lambda_: Optional[float] = typer.Option(None, "--lambda"),
    epsilon: Optional[float] = typer.Option(None, "--epsilon"),
    alpha: Optional[int] = typer.Option(None, "--alpha", help="Machines that must agree (cobra)"),
    k: Optional[int] = typer.Option(None, "--k", help="Size of the machine-training half"),
    tune: bool = typer.Option(False, "--tune", help="Grid-search the default grids first"),
    folds: int = typer.Option(5, "--folds"),
    seed: Optional[int] = typer.Option(None, "--seed"),
):
    """Fit an aggregate on a CSV and save it to a model directory."""
    seed = settings.effective_seed(seed)
    task = "classification" if estimator == EstimatorKind.CLASSIFIER else "auto"
    dataset = load_csv(data, target, task=task)
    specs = _roster(machines, estimator, seed)
    config = _load_config(config_path, lambda_, epsilon, alpha)
    if tune:
        result = grid_search(estimator, None, dataset, folds=folds, seed=seed, specs=specs, base_config=config,
                             n_jobs=settings.N_JOBS)
        config = apply_params(config, result.best_params)
        typer.echo(f"Tuned parameters: {result.best_params} (loss {result.best_loss:.6g})")
    aggregator = CobraAggregator.fit(estimator, config, dataset, specs, k=k, seed=seed, n_jobs=settings.N_JOBS)
    save_model(aggregator, model_dir)
    typer.echo(f"Saved {estimator.value} model to {model_dir}")


@app.command()
@handle_errors
def predict(
    model_dir: Path = typer.Option(..., "--model-dir"),
    input_path: Path = typer.Option(..., "--input", help="CSV of query points"),
    no_header: bool = typer.Option(False, "--no-header"),
):
    """Print one aggregate prediction per input row."""
    aggregator = load_model(model_dir)
    for value in aggregator.predict_batch(load_features(input_path, has_header=not no_header)):
        typer.echo(repr(value.item()))


@app.command()
@handle_errors
def tune(
    data: Path = typer.Option(..., "--data"),
    estimator: EstimatorKind = typer.Option(EstimatorKind.KERNELCOBRA, "--estimator"),
    grid: Optional[List[str]] = typer.Option(None, "--grid", help="e.g. lambda=log:1e-3:1e3:50; repeatable"),
    target: str = typer.Option("y", "--target"),
    machines: Optional[List[MachineKind]] = typer.Option(None, "--machine"),
    folds: int = typer.Option(5, "--folds"),
    seed: Optional[int] = typer.Option(None, "--seed"),
    table: Optional[Path] = typer.Option(None, "--table", help="CSV of the per-candidate table"),
):
    """Grid-search aggregator parameters; prints the TuneResult as JSON."""
    seed = settings.effective_seed(seed)
    try:
        grids = [GridSpec.parse(text) for text in grid] if grid else None
    except ValueError as e:
        raise ConfigError(f"Invalid grid: {e}") from e
    task = "classification" if estimator == EstimatorKind.CLASSIFIER else "auto"
    dataset = load_csv(data, target, task=task)
    result = grid_search(estimator, grids, dataset, folds=folds, seed=seed,
                         specs=_roster(machines, estimator, seed), n_jobs=settings.N_JOBS)
    typer.echo(result.model_dump_json(indent=2))
    if table is not None:
        rows = [
            {**c.params, "mean_loss": c.mean_loss, "std_loss": c.std_loss,
             "no_consensus_fraction": c.no_consensus_fraction, "feasible": c.feasible}
            for c in result.candidates
        ]
        table.parent.mkdir(parents=True, exist_ok=True)
        pd.DataFrame(rows).to_csv(table, index=False)


@bench_app.command("rmse")
@handle_errors
def bench_rmse(
    config_path: Path = typer.Option(..., "--config", help="Bench config JSON"),
    output_dir: Optional[Path] = typer.Option(None, "--output-dir"),
):
    """Run the repeated RMSE benchmark and write its report files."""
    config = load_bench_config(config_path)
    report = run_rmse_benchmark(config)
    paths = write_report(report, output_dir or config.output_dir)
    for row in report.summary:
        flag = " *" if row.best else ""
        typer.echo(f"{row.dataset:<20} {row.model:<28} {row.mean_rmse:.4f} ± {row.std_rmse:.4f}{flag}")
    if report.failures:
        typer.echo(f"{len(report.failures)} runs failed; see {paths['failures']}", err=True)
        raise typer.Exit(code=2)


@bench_app.command("timing")
@handle_errors
def bench_timing(
    sweep: str = typer.Option(..., "--sweep", help="d=10,100,1000 | ell=... | machines=..."),
    config_path: Path = typer.Option(..., "--config"),
    repetitions: Optional[int] = typer.Option(None, "--repetitions"),
    queries: int = typer.Option(20, "--queries"),
    out: Optional[Path] = typer.Option(None, "--out", help="CSV file for the timing table"),
):
    """Time cobra, kernelcobra and mixcobra along one swept variable."""
    try:
        parsed = TimingSweep.parse(sweep)
    except ValueError as e:
        raise ConfigError(f"Invalid sweep: {e}") from e
    config = load_bench_config(config_path)
    rows = run_timing_benchmark(config, parsed, repetitions=repetitions, n_queries=queries)
    path = write_timing_table(rows, out or Path(config.output_dir) / f"timing_{parsed.variable}.csv")
    for row in rows:
        typer.echo(f"{row.variable}={row.value:<8} {row.estimator:<12} "
                   f"aggregation {row.aggregation_median:.3e}s  end-to-end {row.end_to_end_median:.3e}s")
    typer.echo(f"Timing table written to {path}")


@bench_app.command("boundary")
@handle_errors
def bench_boundary(
    data: Path = typer.Option(..., "--data", help="2-d labelled CSV"),
    out: Path = typer.Option(..., "--out"),
    resolution: int = typer.Option(200, "--resolution"),
    lambda_: float = typer.Option(1.0, "--lambda"),
    margin: float = typer.Option(0.5, "--margin", help="Padding around the data extent"),
    per_machine: bool = typer.Option(False, "--machines/--no-machines", help="Also write one grid per machine"),
    seed: Optional[int] = typer.Option(None, "--seed"),
):
    """Fit a classifier aggregate and export its decision grid (and optionally each machine's) as CSV."""
    seed = settings.effective_seed(seed)
    dataset = load_csv(data, task="classification")
    aggregator = CobraAggregator.fit(EstimatorKind.CLASSIFIER, AggregatorConfig(lambda_=lambda_), dataset,
                                     default_classification_roster(seed), seed=seed)
    low = dataset.features.min(axis=0) - margin
    high = dataset.features.max(axis=0) + margin
    bounds = tuple((float(lo), float(hi)) for lo, hi in zip(low, high))
    export_decision_boundary(aggregator, bounds, resolution, out)
    typer.echo(f"Wrote {resolution * resolution} grid cells to {out}")
    if per_machine:
        for name, path in export_machine_boundaries(aggregator, bounds, resolution, out).items():
            typer.echo(f"Wrote the {name} grid to {path}")


def main():
    app()
