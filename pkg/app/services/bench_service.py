"""
Experiment runner: repeated RMSE benchmarks, timing sweeps and decision-boundary grids.
"""
import json
import logging
import time
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from app.core.config import settings
from app.core.errors import ConfigError, DimensionalityError
from app.schemas.aggregation import AggregatorConfig, EstimatorKind
from app.schemas.bench import (
    BenchConfig,
    BenchReport,
    DatasetSource,
    FailedRun,
    PhaseTiming,
    RunPredictions,
    RunRecord,
    SummaryRow,
    TimingRow,
    TimingSweep,
)
from app.schemas.datagen import MIN_DIMENSION, GeneratorKind, GeneratorSpec
from app.schemas.dataset import Dataset
from app.schemas.machine import MachineSpec
from app.services.aggregation_service import CobraAggregator
from app.services.datagen_service import generate, load_csv
from app.services.dataset_service import build_prediction_matrix, derive_seed, split_dataset
from app.services.machine_service import (
    default_classification_roster,
    default_regression_roster,
    fit_machines,
)
from app.services.tuning_service import apply_params, compare_estimators, grid_search, misclassification

logger = logging.getLogger(__name__)

TIMED_ESTIMATORS = (EstimatorKind.COBRA, EstimatorKind.KERNELCOBRA, EstimatorKind.MIXCOBRA)


def load_bench_config(path: Union[str, Path]) -> BenchConfig:
    """Read a JSON bench config; COBRA_SEED, when set, replaces its seed."""
    config = BenchConfig.from_file(path)
    seed = settings.effective_seed(config.seed)
    if seed != config.seed:
        logger.info(f"COBRA_SEED overrides config seed {config.seed} with {seed}")
        config = config.model_copy(update={"seed": seed})
    return config


def train_test_split(data: Dataset, test_fraction: float, seed: int) -> Tuple[Dataset, Dataset]:
    """Shuffled split; the test part holds round(n * test_fraction) rows, at least one."""
    n_test = min(max(1, round(data.n * test_fraction)), data.n - 1)
    order = np.random.default_rng(seed).permutation(data.n)
    return data.take(order[n_test:]), data.take(order[:n_test])


def run_seed(config: BenchConfig, run: int) -> int:
    return config.seed if config.reuse_seed else derive_seed(config.seed, run)


def _roster(config: BenchConfig, source: DatasetSource, seed: int) -> List[MachineSpec]:
    if config.machines:
        return list(config.machines)
    if source.task == "classification":
        return default_classification_roster(seed)
    return default_regression_roster(seed)


def _source_data(source: DatasetSource, seed: int, cached: Optional[Dataset]) -> Dataset:
    if cached is not None:
        return cached
    return generate(source.generator.model_copy(update={"seed": seed}))


def _run_once(config: BenchConfig, source: DatasetSource, run: int, seed: int,
              cached: Optional[Dataset]) -> Tuple[RunRecord, PhaseTiming, RunPredictions]:
    data = _source_data(source, seed, cached)
    train, test = train_test_split(data, config.test_fraction, seed)
    specs = _roster(config, source, seed)
    timing = PhaseTiming(dataset=source.name, run=run)
    classification = source.task == "classification"

    start = time.perf_counter()
    split = split_dataset(train, seed=seed)
    machines = fit_machines(specs, split.train_half)
    timing.fit_machines = time.perf_counter() - start

    start = time.perf_counter()
    matrix = build_prediction_matrix(machines, split.retained_half)
    timing.build_matrix = time.perf_counter() - start

    start = time.perf_counter()
    configs: Dict[str, AggregatorConfig] = {}
    tuned: Dict[str, Dict[str, float]] = {}
    for entry in config.estimators:
        configs[entry.name] = entry.config
        if entry.tune or entry.use_default_grids:
            result = grid_search(entry.kind, entry.tune or None, train, folds=config.folds, seed=seed,
                                 specs=specs, base_config=entry.config)
            configs[entry.name] = apply_params(entry.config, result.best_params)
            tuned[entry.name] = result.best_params
    timing.tune = time.perf_counter() - start

    start = time.perf_counter()
    aggregators = {
        entry.name: CobraAggregator(entry.kind, configs[entry.name], machines, split, matrix)
        for entry in config.estimators
    }
    report = compare_estimators(aggregators, machines, test)
    timing.predict = time.perf_counter() - start

    if classification:
        losses = {m.name: misclassification(test.targets, np.asarray(m.predictions)) for m in report.models}
    else:
        losses = {m.name: m.rmse for m in report.models}
    record = RunRecord(dataset=source.name, run=run, seed=seed, rmse=losses, tuned_params=tuned)
    predictions = RunPredictions(
        dataset=source.name,
        run=run,
        y_true=report.y_true,
        predictions={m.name: m.predictions for m in report.models},
        abs_errors={m.name: m.absolute_errors for m in report.models},
    )
    logger.info(f"{source.name} run {run} finished: " +
                ", ".join(f"{name}={value:.4g}" for name, value in losses.items()))
    return record, timing, predictions


def _safe_run(config: BenchConfig, source: DatasetSource, run: int, seed: int, cached: Optional[Dataset]):
    try:
        return _run_once(config, source, run, seed, cached)
    except Exception as e:
        logger.error(f"{source.name} run {run} (seed {seed}) failed: {type(e).__name__}: {e}")
        return FailedRun(dataset=source.name, run=run, seed=seed, error_type=type(e).__name__, message=str(e))


def summarize(runs: Sequence[RunRecord], datasets: Sequence[str]) -> List[SummaryRow]:
    """Mean and population std of every model's loss per dataset; the lowest mean is flagged best."""
    rows: List[SummaryRow] = []
    for dataset in datasets:
        records = [r for r in runs if r.dataset == dataset]
        if not records:
            continue
        models = list(records[0].rmse)
        block = []
        for model in models:
            values = np.array([r.rmse[model] for r in records])
            block.append(SummaryRow(dataset=dataset, model=model, mean_rmse=float(values.mean()),
                                    std_rmse=float(values.std()), n_runs=len(values)))
        lowest = min(row.mean_rmse for row in block)
        for row in block:
            row.best = row.mean_rmse == lowest
        rows.extend(block)
    return rows


def run_rmse_benchmark(config: BenchConfig) -> BenchReport:
    """Repeat the protocol `config.runs` times per dataset and collect every loss.

    Each run draws its own data (or reuses the CSV), splits train/test, splits the
    training part into D_k/D_l, fits the machines, tunes where asked and scores
    every estimator and every machine on the test part. Regression datasets are
    scored by RMSE, classification datasets by misclassification rate.
    Runs that raise are reported in `failures`.
    """
    jobs = []
    for source in config.datasets:
        cached = load_csv(source.csv_path, source.target_column, task=source.task) if source.csv_path else None
        for run in range(config.runs):
            jobs.append((source, run, run_seed(config, run), cached))
    logger.info(f"Running {len(jobs)} benchmark runs with n_jobs={config.n_jobs}")

    outcomes = Parallel(n_jobs=config.n_jobs)(
        delayed(_safe_run)(config, source, run, seed, cached) for source, run, seed, cached in jobs
    )

    runs: List[RunRecord] = []
    timings: List[PhaseTiming] = []
    failures: List[FailedRun] = []
    predictions: List[RunPredictions] = []
    for outcome in outcomes:
        if isinstance(outcome, FailedRun):
            failures.append(outcome)
            continue
        record, timing, run_predictions = outcome
        runs.append(record)
        timings.append(timing)
        predictions.append(run_predictions)

    if failures:
        logger.warning(f"{len(failures)} of {len(jobs)} runs failed")
    return BenchReport(
        runs_requested=config.runs,
        summary=summarize(runs, [s.name for s in config.datasets]),
        runs=runs,
        failures=failures,
        predictions=predictions,
        timings=timings,
    )


def predictions_table(report: BenchReport) -> pd.DataFrame:
    """One row per test point of every run: y_true, then one column per aggregate and per machine."""
    frames = [
        pd.DataFrame({"dataset": p.dataset, "run": p.run, "point": np.arange(len(p.y_true)),
                      "y_true": p.y_true, **p.predictions})
        for p in report.predictions
    ]
    if not frames:
        return pd.DataFrame(columns=["dataset", "run", "point", "y_true"])
    return pd.concat(frames, ignore_index=True)


def write_report(report: BenchReport, output_dir: Union[str, Path]) -> Dict[str, Path]:
    """Write the report files; everything except timings.json is identical across reruns."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "report": output_dir / "report.json",
        "timings": output_dir / "timings.json",
        "summary": output_dir / "summary.csv",
        "runs": output_dir / "runs.csv",
        "point_errors": output_dir / "point_errors.csv",
        "predictions": output_dir / "predictions.csv",
        "failures": output_dir / "failures.json",
    }
    paths["report"].write_text(report.model_dump_json(indent=2, exclude={"timings"}), encoding="utf-8")
    paths["timings"].write_text(
        json.dumps([t.model_dump() for t in report.timings], indent=2), encoding="utf-8"
    )
    paths["failures"].write_text(
        json.dumps([f.model_dump() for f in report.failures], indent=2), encoding="utf-8"
    )
    pd.DataFrame([row.model_dump() for row in report.summary],
                 columns=list(SummaryRow.model_fields)).to_csv(paths["summary"], index=False)
    pd.DataFrame(
        [
            {"dataset": r.dataset, "run": r.run, "seed": r.seed, "model": model, "rmse": value}
            for r in report.runs
            for model, value in r.rmse.items()
        ],
        columns=["dataset", "run", "seed", "model", "rmse"],
    ).to_csv(paths["runs"], index=False)
    pd.DataFrame(
        [
            {"dataset": p.dataset, "run": p.run, "model": model, "point": i, "abs_error": error}
            for p in report.predictions
            for model, errors in p.abs_errors.items()
            for i, error in enumerate(errors)
        ],
        columns=["dataset", "run", "model", "point", "abs_error"],
    ).to_csv(paths["point_errors"], index=False)
    predictions_table(report).to_csv(paths["predictions"], index=False)
    logger.info(f"Report written to {output_dir}")
    return paths


def _timing_config(config: BenchConfig, kind: EstimatorKind, matrix_range: float) -> AggregatorConfig:
    for entry in config.estimators:
        if entry.kind == kind:
            return entry.config.model_copy(update={"uniform_fallback": True})
    if kind == EstimatorKind.COBRA:
        return AggregatorConfig(epsilon=max(0.25 * matrix_range, 1e-6), alpha=1, uniform_fallback=True)
    return AggregatorConfig(uniform_fallback=True)


def _timing_specs(config: BenchConfig, n_machines: Optional[int]) -> List[MachineSpec]:
    base = list(config.machines) or default_regression_roster(config.seed)
    if n_machines is None:
        return base
    return [base[i % len(base)].model_copy(update={"seed": i}) for i in range(n_machines)]


def _time_per_query(fn, n_queries: int, repetitions: int) -> Tuple[float, float]:
    fn()  # warm-up, untimed
    samples = []
    for _ in range(repetitions):
        start = time.perf_counter()
        fn()
        samples.append((time.perf_counter() - start) / n_queries)
    return float(np.median(samples)), float(np.std(samples))


def run_timing_benchmark(
    config: BenchConfig,
    sweep: TimingSweep,
    repetitions: Optional[int] = None,
    n_queries: int = 20,
    base_d: int = 10,
    base_ell: int = 300,
) -> List[TimingRow]:
    """Per-query timing of cobra, kernelcobra and mixcobra along one swept variable.

    Aggregation-only time reuses the cached prediction matrix and the query's
    machine predictions; end-to-end time also runs the machines. Measurements
    are serial. Each measurement starts with one untimed warm-up call.

    Args:
        config: Supplies machines, estimator parameters, seed and the default repetition count
        sweep: Swept variable (d, ell or machines) and its values
        repetitions: Timed repetitions per value; defaults to config.runs
        n_queries: Query points per repetition
        base_d: Input dimension when d is not swept; at least 5
        base_ell: Size of D_l when ell is not swept

    Returns:
        One row per (sweep value, estimator)
    """
    if base_d < MIN_DIMENSION[GeneratorKind.FRIEDMAN1]:
        raise ConfigError(f"Timing runs on Friedman #1, which needs base_d >= 5, got {base_d}")
    repetitions = repetitions or config.runs
    rows: List[TimingRow] = []
    for value in sweep.values:
        d = value if sweep.variable == "d" else base_d
        ell = value if sweep.variable == "ell" else base_ell
        specs = _timing_specs(config, value if sweep.variable == "machines" else None)

        spec = GeneratorSpec(kind=GeneratorKind.FRIEDMAN1, n=2 * ell + n_queries, d=d, noise=1.0, seed=config.seed)
        data = generate(spec)
        train = data.take(np.arange(2 * ell))
        queries = data.features[2 * ell:]
        split = split_dataset(train, k=ell, seed=config.seed)
        machines = fit_machines(specs, split.train_half)
        matrix = build_prediction_matrix(machines, split.retained_half)

        for kind in TIMED_ESTIMATORS:
            aggregator = CobraAggregator(kind, _timing_config(config, kind, matrix.value_range()),
                                         machines, split, matrix)
            query_preds = aggregator.query_predictions(queries)

            def aggregate_only():
                for i in range(n_queries):
                    aggregator.combine(aggregator.weights_from_query(query_preds[i], queries[i], i))

            agg_median, agg_std = _time_per_query(aggregate_only, n_queries, repetitions)
            e2e_median, e2e_std = _time_per_query(lambda: aggregator.predict_batch(queries),
                                                  n_queries, repetitions)
            rows.append(TimingRow(variable=sweep.variable, value=value, estimator=kind.value,
                                  aggregation_median=agg_median, aggregation_std=agg_std,
                                  end_to_end_median=e2e_median, end_to_end_std=e2e_std))
            logger.debug(f"{sweep.variable}={value} {kind.value}: {agg_median:.3e}s per query")
    return rows


def write_timing_table(rows: Sequence[TimingRow], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame([row.model_dump() for row in rows], columns=list(TimingRow.model_fields)).to_csv(
        path, index=False
    )
    return path


def export_decision_boundary(
    classifier,
    bounds: Tuple[Tuple[float, float], Tuple[float, float]],
    resolution: int,
    path: Optional[Union[str, Path]] = None,
) -> pd.DataFrame:
    """Predicted label on a regular resolution x resolution grid over `bounds`.

    `classifier` is anything with `n_features` and `predict_batch` (a
    CobraAggregator or a single machine). Rows run over x2 fastest.
    """
    if classifier.n_features != 2:
        raise DimensionalityError(f"Decision boundaries need a 2-d classifier, got d={classifier.n_features}")
    if resolution < 2:
        raise ValueError(f"resolution must be >= 2, got {resolution}")
    (x1_low, x1_high), (x2_low, x2_high) = bounds
    x1, x2 = np.meshgrid(np.linspace(x1_low, x1_high, resolution),
                         np.linspace(x2_low, x2_high, resolution), indexing="ij")
    grid = np.column_stack([x1.ravel(), x2.ravel()])
    frame = pd.DataFrame({"x1": grid[:, 0], "x2": grid[:, 1],
                          "label": np.asarray(classifier.predict_batch(grid)).astype(np.int64)})
    if path is not None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False)
        logger.info(f"Wrote a {resolution}x{resolution} decision grid to {path}")
    return frame


def export_machine_boundaries(
    aggregator: CobraAggregator,
    bounds: Tuple[Tuple[float, float], Tuple[float, float]],
    resolution: int,
    path: Union[str, Path],
) -> Dict[str, Path]:
    """Write one decision grid per machine of `aggregator`, as `<stem>_<machine><suffix>` next to `path`."""
    path = Path(path)
    paths: Dict[str, Path] = {}
    for machine in aggregator.machines:
        target = path.with_name(f"{path.stem}_{machine.name}{path.suffix or '.csv'}")
        export_decision_boundary(machine, bounds, resolution, target)
        paths[machine.name] = target
    return paths
