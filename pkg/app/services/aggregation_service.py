"""
Weight schemes and aggregate predictors.

Every weight operation consumes the cached M x l prediction matrix on D_l and
the M machine predictions at the query, so one query costs O(M * l) and never
touches the input dimension (the MixCobra baseline excepted).
"""
import logging
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import softmax

from app.core.errors import EmptyEnsembleError, InvalidWeightsError, LabelError, NoConsensusError, ShapeError
from app.schemas.aggregation import (
    WEIGHT_TOLERANCE,
    AggregatorConfig,
    EstimatorKind,
    KernelSpec,
    PointWeighting,
    WeightVector,
)
from app.schemas.dataset import Dataset, PredictionMatrix, SplitPair
from app.schemas.machine import MachineSpec
from app.services.dataset_service import build_prediction_matrix, split_dataset
from app.services.kernel_service import KernelFn, as_kernel_fn
from app.services.machine_service import TrainedMachine, fit_machines

logger = logging.getLogger(__name__)

MatrixLike = Union[PredictionMatrix, np.ndarray]
REGRESSION_KINDS = frozenset({
    EstimatorKind.COBRA,
    EstimatorKind.KERNELCOBRA,
    EstimatorKind.GENERAL_KERNEL,
    EstimatorKind.MIXCOBRA,
})


def _prepare(train_preds: MatrixLike, query_preds) -> Tuple[np.ndarray, np.ndarray]:
    values = train_preds.values if isinstance(train_preds, PredictionMatrix) else np.asarray(train_preds, dtype=float)
    if values.ndim != 2 or values.shape[1] < 1:
        raise ShapeError(f"Prediction matrix must be M x l with l >= 1, got shape {values.shape}")
    if values.shape[0] < 1:
        raise EmptyEnsembleError("Prediction matrix has no machine rows")
    query = np.asarray(query_preds, dtype=float).reshape(-1)
    if query.shape[0] != values.shape[0]:
        raise ShapeError(f"Expected {values.shape[0]} query predictions, got {query.shape[0]}")
    return values, query


def _normalise(scores: np.ndarray, query_index: Optional[int], uniform_fallback: bool) -> WeightVector:
    total = scores.sum()
    if total <= 0.0:
        if not uniform_fallback:
            raise NoConsensusError(query_index)
        logger.warning(f"No consensus for query {query_index}; using uniform weights")
        return uniform_weights(scores.shape[0])
    return WeightVector(weights=scores / total)


def uniform_weights(ell: int) -> WeightVector:
    return WeightVector(weights=np.full(ell, 1.0 / ell))


def prediction_distances(train_preds: MatrixLike, query_preds) -> np.ndarray:
    """sum_m |r_m(X_i) - r_m(x)| for every retained point i."""
    values, query = _prepare(train_preds, query_preds)
    return np.abs(values - query[:, None]).sum(axis=0)


def kernelcobra_weights(train_preds: MatrixLike, query_preds, lambda_: float) -> WeightVector:
    """Exponential weights exp(-lambda * sum_m |r_m(X_i) - r_m(x)|), normalised.

    Computed as a max-shifted softmax, so the denominator never underflows.
    """
    if lambda_ < 0:
        raise ValueError(f"lambda must be >= 0, got {lambda_}")
    distances = prediction_distances(train_preds, query_preds)
    return WeightVector(weights=softmax(-lambda_ * distances))


def general_kernel_weights(
    train_preds: MatrixLike,
    query_preds,
    kernel: Union[KernelSpec, KernelFn],
    query_index: Optional[int] = None,
    uniform_fallback: bool = False,
) -> WeightVector:
    """Weights proportional to sum_m K(r_m(X_i), r_m(x)).

    Raises:
        NoConsensusError: every kernel value is zero (threshold-type kernels)
    """
    values, query = _prepare(train_preds, query_preds)
    scores = as_kernel_fn(kernel)(values, query[:, None]).sum(axis=0)
    return _normalise(scores, query_index, uniform_fallback)


def cobra_weights(
    train_preds: MatrixLike,
    query_preds,
    epsilon: float,
    alpha: Optional[int] = None,
    query_index: Optional[int] = None,
    uniform_fallback: bool = False,
) -> WeightVector:
    """Uniform weights over the points where at least `alpha` machines predict within
    epsilon of their query prediction; alpha defaults to M (all machines)."""
    values, query = _prepare(train_preds, query_preds)
    n_machines = values.shape[0]
    alpha = n_machines if alpha is None else alpha
    if not 1 <= alpha <= n_machines:
        raise ValueError(f"alpha must lie in [1, {n_machines}], got {alpha}")
    agreeing = (np.abs(values - query[:, None]) <= epsilon).sum(axis=0)
    selected = (agreeing >= alpha).astype(float)
    return _normalise(selected, query_index, uniform_fallback)


def mixcobra_weights(
    train_inputs: np.ndarray,
    query_input,
    train_preds: MatrixLike,
    query_preds,
    alpha_in: float,
    lambda_: float,
) -> WeightVector:
    """Baseline mixing input and prediction proximity:
    exp(-alpha_in * ||x - X_i||^2 - lambda * sum_m |r_m(X_i) - r_m(x)|), normalised.
    Costs O(l * d) for the input term."""
    distances = prediction_distances(train_preds, query_preds)
    train_inputs = np.asarray(train_inputs, dtype=float)
    query_input = np.asarray(query_input, dtype=float).reshape(-1)
    if train_inputs.shape != (distances.shape[0], query_input.shape[0]):
        raise ShapeError(
            f"Inputs of shape {train_inputs.shape} do not match l={distances.shape[0]}, d={query_input.shape[0]}"
        )
    input_sq = np.sum((train_inputs - query_input) ** 2, axis=1)
    return WeightVector(weights=softmax(-alpha_in * input_sq - lambda_ * distances))


def label_agreement_weights(
    train_preds: MatrixLike,
    query_preds,
    query_index: Optional[int] = None,
    uniform_fallback: bool = False,
) -> WeightVector:
    """Weights proportional to the number of machines whose label at X_i equals
    their label at the query."""
    values, query = _prepare(train_preds, query_preds)
    scores = (values == query[:, None]).sum(axis=0).astype(float)
    return _normalise(scores, query_index, uniform_fallback)


def _weight_array(weights: Union[WeightVector, np.ndarray]) -> np.ndarray:
    return weights.weights if isinstance(weights, WeightVector) else np.asarray(weights, dtype=float)


def aggregate_regression(weights: Union[WeightVector, np.ndarray], retained_targets) -> float:
    """sum_i W_i * Y_i, a convex combination of the retained targets."""
    w = _weight_array(weights)
    y = np.asarray(retained_targets, dtype=float)
    if w.shape != y.shape:
        raise ShapeError(f"{w.shape[0]} weights for {y.shape[0]} targets")
    return float(np.clip(w @ y, y.min(), y.max()))


def aggregate_unsupervised(point_weights: Union[WeightVector, np.ndarray], machine_weights,
                           train_preds: MatrixLike) -> float:
    """sum_i W_i * (sum_m W_m * r_m(X_i)); reads no retained target."""
    w = _weight_array(point_weights)
    values = train_preds.values if isinstance(train_preds, PredictionMatrix) else np.asarray(train_preds, dtype=float)
    mw = np.asarray(machine_weights, dtype=float)
    if np.any(mw < 0) or abs(mw.sum() - 1.0) > WEIGHT_TOLERANCE:
        raise InvalidWeightsError(f"Machine weights must be nonnegative and sum to 1, got sum {mw.sum()!r}")
    if mw.shape[0] != values.shape[0] or w.shape[0] != values.shape[1]:
        raise ShapeError(
            f"{mw.shape[0]} machine weights and {w.shape[0]} point weights for a {values.shape} matrix"
        )
    per_point = mw @ values
    return float(np.clip(w @ per_point, per_point.min(), per_point.max()))


def classify_binary(weights: Union[WeightVector, np.ndarray], retained_labels) -> int:
    """1 when the weighted mass of label 1 is at least 1/2, else 0."""
    w = _weight_array(weights)
    labels = np.asarray(retained_labels)
    if labels.shape != w.shape:
        raise ShapeError(f"{w.shape[0]} weights for {labels.shape[0]} labels")
    if not np.all(np.isin(labels, (0, 1))):
        raise LabelError("Binary classification needs labels in {0, 1}")
    return int(w @ labels.astype(float) >= 0.5)


def classify_multiclass(weights: Union[WeightVector, np.ndarray], retained_labels):
    """Label with the largest weighted mass; ties go to the smallest label."""
    w = _weight_array(weights)
    labels = np.asarray(retained_labels)
    if labels.size == 0:
        raise LabelError("No labels to vote over")
    if labels.shape != w.shape:
        raise ShapeError(f"{w.shape[0]} weights for {labels.shape[0]} labels")
    classes, inverse = np.unique(labels, return_inverse=True)
    mass = np.bincount(inverse, weights=w, minlength=classes.shape[0])
    winner = classes[np.flatnonzero(mass >= mass.max() - 1e-12)[0]]
    return winner.item()


def _is_binary(labels: np.ndarray) -> bool:
    return bool(np.all(np.isin(labels, (0, 1))))


class CobraAggregator:
    """A fitted aggregate estimator: machines on D_k plus the cached matrix on D_l."""

    def __init__(
        self,
        kind: EstimatorKind,
        config: AggregatorConfig,
        machines: Sequence[TrainedMachine],
        split: SplitPair,
        prediction_matrix: Optional[PredictionMatrix] = None,
    ):
        if not machines:
            raise EmptyEnsembleError("An aggregate needs at least one machine")
        self.kind = EstimatorKind(kind)
        self.config = config
        self.machines = list(machines)
        self.split = split
        if prediction_matrix is None:
            prediction_matrix = build_prediction_matrix(self.machines, split.retained_half)
        self.matrix = prediction_matrix
        if self.matrix.values.shape != (len(self.machines), split.ell):
            raise ShapeError("Prediction matrix does not match the machines and D_l")
        targets = split.retained_half.targets
        if self.kind == EstimatorKind.CLASSIFIER and (targets is None or targets.dtype.kind != "i"):
            raise LabelError("The classifier estimator needs integer labels on D_l")
        self._binary = self.kind == EstimatorKind.CLASSIFIER and _is_binary(targets)
        self._alpha = config.resolved_alpha(len(self.machines))
        self._machine_weights = config.resolved_machine_weights(len(self.machines))

    @classmethod
    def fit(
        cls,
        kind: EstimatorKind,
        config: AggregatorConfig,
        data: Dataset,
        specs: Sequence[MachineSpec],
        k: Optional[int] = None,
        seed: int = 0,
        n_jobs: int = 1,
    ) -> "CobraAggregator":
        """Split `data`, fit the machines on D_k and cache their predictions on D_l."""
        split = split_dataset(data, k=k, seed=seed)
        machines = fit_machines(specs, split.train_half, n_jobs=n_jobs)
        logger.info(f"Fitted {kind} aggregate with {len(machines)} machines (k={split.k}, ell={split.ell})")
        return cls(kind, config, machines, split)

    def with_config(self, config: AggregatorConfig, kind: Optional[EstimatorKind] = None) -> "CobraAggregator":
        """Same machines and cached matrix, other parameters."""
        return CobraAggregator(kind or self.kind, config, self.machines, self.split, self.matrix)

    @property
    def n_features(self) -> int:
        return self.split.train_half.d

    @property
    def n_machines(self) -> int:
        return len(self.machines)

    @property
    def is_classifier(self) -> bool:
        return self.kind == EstimatorKind.CLASSIFIER

    def query_predictions(self, X: np.ndarray) -> np.ndarray:
        """(n, M) machine predictions at the query rows."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.column_stack([machine.predict_batch(X) for machine in self.machines])

    def weights_from_query(self, query_preds: np.ndarray, x: Optional[np.ndarray] = None,
                           query_index: Optional[int] = None) -> WeightVector:
        """Point weights for one query given its machine predictions (aggregation only)."""
        cfg = self.config
        fallback = cfg.uniform_fallback
        scheme = self.kind
        if self.kind in (EstimatorKind.UNSUPERVISED, EstimatorKind.CLASSIFIER):
            scheme = {
                PointWeighting.KERNELCOBRA: EstimatorKind.KERNELCOBRA,
                PointWeighting.GENERAL_KERNEL: EstimatorKind.GENERAL_KERNEL,
                PointWeighting.COBRA: EstimatorKind.COBRA,
                PointWeighting.LABEL_AGREEMENT: None,
            }[cfg.point_weights]

        if scheme == EstimatorKind.KERNELCOBRA:
            return kernelcobra_weights(self.matrix, query_preds, cfg.lambda_)
        if scheme == EstimatorKind.GENERAL_KERNEL:
            return general_kernel_weights(self.matrix, query_preds, cfg.kernel, query_index, fallback)
        if scheme == EstimatorKind.COBRA:
            return cobra_weights(self.matrix, query_preds, cfg.epsilon, self._alpha, query_index, fallback)
        if scheme == EstimatorKind.MIXCOBRA:
            if x is None:
                raise ValueError("MixCobra weights need the query input")
            return mixcobra_weights(self.split.retained_half.features, x, self.matrix, query_preds,
                                    cfg.alpha_in, cfg.lambda_)
        return label_agreement_weights(self.matrix, query_preds, query_index, fallback)

    def combine(self, weights: WeightVector):
        """Turn point weights into the estimator's output."""
        if self.kind in REGRESSION_KINDS:
            return aggregate_regression(weights, self.split.retained_half.targets)
        if self.kind == EstimatorKind.UNSUPERVISED:
            return aggregate_unsupervised(weights, self._machine_weights, self.matrix)
        labels = self.split.retained_half.targets
        if self._binary:
            return classify_binary(weights, labels)
        return classify_multiclass(weights, labels)

    def weights(self, x: np.ndarray, query_index: Optional[int] = None) -> WeightVector:
        x = np.asarray(x, dtype=float).reshape(-1)
        query_preds = self.query_predictions(x[None, :])[0]
        return self.weights_from_query(query_preds, x, query_index)

    def predict(self, x: np.ndarray):
        """Aggregate prediction at one d-vector."""
        return self.combine(self.weights(x))

    def predict_queries(self, query_preds: np.ndarray, X: np.ndarray,
                        uniform_on_no_consensus: bool = False) -> Tuple[np.ndarray, int]:
        """Predictions for precomputed machine outputs; returns (predictions, no-consensus count).

        With `uniform_on_no_consensus`, points without consensus get the
        uniform-weights prediction instead of raising.
        """
        outputs = []
        failures = 0
        for i in range(query_preds.shape[0]):
            try:
                weights = self.weights_from_query(query_preds[i], X[i], query_index=i)
            except NoConsensusError:
                if not uniform_on_no_consensus:
                    raise
                failures += 1
                weights = uniform_weights(self.split.ell)
            outputs.append(self.combine(weights))
        dtype = np.int64 if self.is_classifier else float
        return np.asarray(outputs, dtype=dtype), failures

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        """Aggregate predictions for every row of X."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise ShapeError(f"Expected {self.n_features} features, got {X.shape[1]}")
        predictions, _ = self.predict_queries(self.query_predictions(X), X)
        return predictions


def predict(
    estimator_kind: EstimatorKind,
    config: AggregatorConfig,
    machines: Sequence[TrainedMachine],
    split: SplitPair,
    x: np.ndarray,
    prediction_matrix: Optional[PredictionMatrix] = None,
):
    """One aggregate prediction at x; pass `prediction_matrix` to reuse a cached matrix."""
    return CobraAggregator(estimator_kind, config, machines, split, prediction_matrix).predict(x)
