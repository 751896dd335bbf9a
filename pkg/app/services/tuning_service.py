"""
Hyperparameter selection by seeded k-fold grid search, and error reports.
"""
import itertools
import logging
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from app.core.errors import NoConsensusError
from app.schemas.aggregation import AggregatorConfig, EstimatorKind, KernelSpec, PointWeighting
from app.schemas.dataset import Dataset
from app.schemas.machine import MachineSpec
from app.schemas.tuning import CandidateResult, ErrorReport, GridSpec, ModelErrors, TuneResult
from app.services.aggregation_service import CobraAggregator
from app.services.dataset_service import derive_seed
from app.services.machine_service import (
    TrainedMachine,
    default_classification_roster,
    default_regression_roster,
)

logger = logging.getLogger(__name__)

INFEASIBLE_FRACTION = 0.5
QUANTILES = (0.0, 0.25, 0.5, 0.75, 0.9, 1.0)


def rmse(y_true, y_pred) -> float:
    diff = np.asarray(y_true, dtype=float) - np.asarray(y_pred, dtype=float)
    return float(np.sqrt(np.mean(diff ** 2)))


def misclassification(y_true, y_pred) -> float:
    return float(np.mean(np.asarray(y_true) != np.asarray(y_pred)))


def kfold_indices(n: int, folds: int, seed: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Shuffled (train, validation) index pairs; fold sizes differ by at most one."""
    if folds < 2:
        raise ValueError(f"folds must be >= 2, got {folds}")
    if folds > n:
        raise ValueError(f"Cannot make {folds} folds from {n} rows")
    order = np.random.default_rng(seed).permutation(n)
    chunks = np.array_split(order, folds)
    return [
        (np.concatenate([c for j, c in enumerate(chunks) if j != i]), chunks[i])
        for i in range(folds)
    ]


def lambda_grid() -> GridSpec:
    """{0} plus 50 log-spaced points in [1e-3, 1e3]; 0 is the global-mean candidate."""
    values = [0.0] + np.logspace(-3, 3, 50).tolist()
    return GridSpec(parameter="lambda", values=values)


def default_grids(
    kind: EstimatorKind,
    matrix_range: float,
    n_machines: int,
    point_weights: PointWeighting = PointWeighting.KERNELCOBRA,
) -> List[GridSpec]:
    """Default grids for one estimator.

    Args:
        kind: Estimator to tune
        matrix_range: max - min over the prediction matrix, scales the epsilon grid
        n_machines: M, the alpha grid is 1..M
        point_weights: Weighting used by the unsupervised and classifier estimators

    Returns:
        One GridSpec per tuned parameter
    """
    scheme = kind
    if kind in (EstimatorKind.UNSUPERVISED, EstimatorKind.CLASSIFIER):
        scheme = {
            PointWeighting.KERNELCOBRA: EstimatorKind.KERNELCOBRA,
            PointWeighting.GENERAL_KERNEL: EstimatorKind.GENERAL_KERNEL,
            PointWeighting.COBRA: EstimatorKind.COBRA,
            PointWeighting.LABEL_AGREEMENT: None,
        }[point_weights]

    if scheme in (EstimatorKind.KERNELCOBRA, EstimatorKind.MIXCOBRA):
        return [lambda_grid()]
    if scheme == EstimatorKind.GENERAL_KERNEL:
        return [GridSpec(parameter="bandwidth", scale="log", low=1e-3, high=1e3, num=50)]
    if scheme == EstimatorKind.COBRA:
        spread = matrix_range if matrix_range > 0 else 1.0
        return [
            GridSpec(parameter="epsilon", scale="linear", low=1e-3 * spread, high=spread, num=100),
            GridSpec(parameter="alpha", values=list(range(1, n_machines + 1))),
        ]
    return []


def apply_params(config: AggregatorConfig, params: Mapping[str, float]) -> AggregatorConfig:
    """Copy of `config` with grid parameters substituted."""
    update = {}
    for name, value in params.items():
        if name == "lambda":
            update["lambda_"] = float(value)
        elif name == "alpha":
            update["alpha"] = int(value)
        elif name == "bandwidth":
            update["kernel"] = KernelSpec(kind=config.kernel.kind, bandwidth=value)
        else:
            update[name] = float(value)
    return config.model_copy(update=update)


def _default_specs(kind: EstimatorKind, seed: int) -> List[MachineSpec]:
    if kind == EstimatorKind.CLASSIFIER:
        return default_classification_roster(seed)
    return default_regression_roster(seed)


def _evaluate_fold(
    kind: EstimatorKind,
    base_config: AggregatorConfig,
    combos: List[Dict[str, float]],
    data: Dataset,
    train_idx: np.ndarray,
    val_idx: np.ndarray,
    specs: Sequence[MachineSpec],
    k: Optional[int],
    seed: int,
) -> List[Tuple[Optional[float], int]]:
    """(loss, no-consensus count) of every combination on one fold; loss None when invalid."""
    train, val = data.take(train_idx), data.take(val_idx)
    aggregator = CobraAggregator.fit(kind, base_config, train, specs, k=k, seed=seed)
    query_preds = aggregator.query_predictions(val.features)
    loss_fn = misclassification if kind == EstimatorKind.CLASSIFIER else rmse

    results = []
    for params in combos:
        try:
            candidate = aggregator.with_config(apply_params(base_config, params))
        except ValueError as e:
            logger.warning(f"Skipping {params}: {e}")
            results.append((None, val.n))
            continue
        predictions, failures = candidate.predict_queries(query_preds, val.features,
                                                          uniform_on_no_consensus=True)
        results.append((loss_fn(val.targets, predictions), failures))
    return results


def grid_search(
    estimator_kind: EstimatorKind,
    grids: Optional[Sequence[GridSpec]],
    data: Dataset,
    folds: int = 5,
    seed: int = 0,
    specs: Optional[Sequence[MachineSpec]] = None,
    base_config: Optional[AggregatorConfig] = None,
    k: Optional[int] = None,
    n_jobs: int = 1,
) -> TuneResult:
    """Pick the parameter combination with the lowest mean cross-validated loss.

    Machines are fitted once per fold; every candidate reuses the fold's cached
    prediction matrix. Candidates with no consensus on more than half of the
    validation points are infeasible. Ties go to the earliest candidate in
    ascending order, i.e. the smallest values.

    Args:
        estimator_kind: Aggregate estimator to tune
        grids: Parameter grids; None uses default_grids
        data: Training data, with targets
        folds: Number of folds (>= 2)
        seed: Seed of the fold assignment and the per-fold splits
        specs: Machine roster; defaults to the roster matching the task
        base_config: Parameters not being tuned
        k: Size of D_k inside each fold's training portion
        n_jobs: joblib workers over folds

    Returns:
        The search result with the per-candidate table
    """
    kind = EstimatorKind(estimator_kind)
    if data.targets is None:
        raise ValueError("Tuning requires a dataset with targets")
    base_config = base_config or AggregatorConfig()
    specs = list(specs) if specs else _default_specs(kind, seed)
    splits = kfold_indices(data.n, folds, seed)

    if grids is None:
        grids = _grids_for(kind, base_config, data, specs, k, seed)
    names = [g.parameter for g in grids]
    combos = [dict(zip(names, values)) for values in itertools.product(*(g.candidates() for g in grids))]
    if not combos:
        combos = [{}]
    logger.info(f"Grid search for {kind.value}: {len(combos)} candidates x {folds} folds")

    fold_results = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_evaluate_fold)(kind, base_config, combos, data, train_idx, val_idx, specs, k,
                                derive_seed(seed, fold))
        for fold, (train_idx, val_idx) in enumerate(splits)
    )

    candidates: List[CandidateResult] = []
    best: Optional[CandidateResult] = None
    for c, params in enumerate(combos):
        per_fold = [fold_results[f][c] for f in range(folds)]
        failures = sum(count for _, count in per_fold)
        fraction = failures / data.n
        if any(loss is None for loss, _ in per_fold) or fraction > INFEASIBLE_FRACTION:
            candidates.append(CandidateResult(params=params, no_consensus_fraction=fraction, feasible=False))
            continue
        losses = [loss for loss, _ in per_fold]
        result = CandidateResult(
            params=params,
            mean_loss=float(np.mean(losses)),
            std_loss=float(np.std(losses)),
            fold_losses=losses,
            no_consensus_fraction=fraction,
        )
        logger.debug(f"{params}: mean loss {result.mean_loss:.6g}")
        candidates.append(result)
        if best is None or result.mean_loss < best.mean_loss:
            best = result

    if best is None:
        raise NoConsensusError(message=f"Every {kind.value} candidate is infeasible (no consensus)")
    logger.info(f"Best {kind.value} parameters {best.params} with mean loss {best.mean_loss:.6g}")
    return TuneResult(
        estimator=kind.value,
        best_params=best.params,
        best_loss=best.mean_loss,
        loss="misclassification" if kind == EstimatorKind.CLASSIFIER else "rmse",
        folds=folds,
        seed=seed,
        candidates=candidates,
    )


def _grids_for(kind: EstimatorKind, config: AggregatorConfig, data: Dataset,
               specs: Sequence[MachineSpec], k: Optional[int], seed: int) -> List[GridSpec]:
    # The epsilon grid needs the prediction range R from a preliminary split
    matrix_range = 1.0
    if EstimatorKind.COBRA in (kind, _point_scheme(kind, config)):
        preliminary = CobraAggregator.fit(kind, config, data, specs, k=k, seed=seed)
        matrix_range = preliminary.matrix.value_range()
    return default_grids(kind, matrix_range, len(specs), config.point_weights)


def _point_scheme(kind: EstimatorKind, config: AggregatorConfig) -> Optional[EstimatorKind]:
    if kind in (EstimatorKind.UNSUPERVISED, EstimatorKind.CLASSIFIER) and \
            config.point_weights == PointWeighting.COBRA:
        return EstimatorKind.COBRA
    return None


def optimal_bandwidth(
    data: Dataset,
    kind: EstimatorKind = EstimatorKind.KERNELCOBRA,
    folds: int = 5,
    seed: int = 0,
    specs: Optional[Sequence[MachineSpec]] = None,
    base_config: Optional[AggregatorConfig] = None,
) -> TuneResult:
    """Search the single bandwidth-like parameter of `kind` (lambda, kernel bandwidth or epsilon)."""
    kind = EstimatorKind(kind)
    base_config = base_config or AggregatorConfig()
    specs = list(specs) if specs else _default_specs(kind, seed)
    grids = _grids_for(kind, base_config, data, specs, None, seed)
    return grid_search(kind, grids[:1], data, folds=folds, seed=seed, specs=specs, base_config=base_config)


def model_errors(name: str, y_true, y_pred) -> ModelErrors:
    """Per-point errors of one model and their summary."""
    signed = np.asarray(y_pred, dtype=float) - np.asarray(y_true, dtype=float)
    absolute = np.abs(signed)
    return ModelErrors(
        name=name,
        predictions=np.asarray(y_pred, dtype=float).tolist(),
        absolute_errors=absolute.tolist(),
        squared_errors=(signed ** 2).tolist(),
        rmse=float(np.sqrt(np.mean(signed ** 2))),
        mae=float(absolute.mean()),
        error_std=float(absolute.std()),
        quantiles={f"q{round(q * 100)}": float(np.quantile(absolute, q)) for q in QUANTILES},
    )


def compare_estimators(
    estimators: Mapping[str, CobraAggregator],
    machines: Sequence[TrainedMachine],
    test: Dataset,
) -> ErrorReport:
    """Errors of every aggregate and every individual machine on `test`."""
    if test.targets is None:
        raise ValueError("Comparison requires a test set with targets")
    models = [
        model_errors(name, test.targets, estimator.predict_batch(test.features))
        for name, estimator in estimators.items()
    ]
    models += [
        model_errors(machine.name, test.targets, machine.predict_batch(test.features))
        for machine in machines
    ]
    return ErrorReport(n_points=test.n, y_true=np.asarray(test.targets, dtype=float).tolist(), models=models)
