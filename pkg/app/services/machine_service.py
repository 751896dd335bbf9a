"""
Machines: base learners fitted on the first half D_k of the data.
"""
import logging
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
from joblib import Parallel, delayed

from app.core.errors import LabelError, MachineOutputError, ShapeError
from app.schemas.dataset import Dataset
from app.schemas.machine import MachineKind, MachineSpec
from app.services.learners import (
    DecisionTreeClassifier,
    DecisionTreeRegressor,
    GaussianNaiveBayes,
    KNeighborsClassifier,
    KNeighborsRegressor,
    LassoRegressor,
    Learner,
    LogisticRegressionClassifier,
    RandomForestClassifier,
    RandomForestRegressor,
    RidgeRegressor,
)

logger = logging.getLogger(__name__)

PredictFn = Callable[[np.ndarray], np.ndarray]

_FACTORIES: Dict[MachineKind, Callable[[dict, int], Learner]] = {
    MachineKind.RIDGE: lambda p, seed: RidgeRegressor(p["regularization"]),
    MachineKind.LASSO: lambda p, seed: LassoRegressor(p["regularization"], p["tol"], p["max_iter"]),
    MachineKind.KNN: lambda p, seed: KNeighborsRegressor(p["n_neighbors"]),
    MachineKind.DECISION_TREE: lambda p, seed: DecisionTreeRegressor(
        p["max_depth"], p["min_leaf"], p["max_features"], seed),
    MachineKind.RANDOM_FOREST: lambda p, seed: RandomForestRegressor(
        p["n_trees"], p["max_depth"], p["min_leaf"], p["max_features"], p["bootstrap"], seed),
    MachineKind.KNN_CLASSIFIER: lambda p, seed: KNeighborsClassifier(p["n_neighbors"]),
    MachineKind.DECISION_TREE_CLASSIFIER: lambda p, seed: DecisionTreeClassifier(
        p["max_depth"], p["min_leaf"], p["max_features"], seed),
    MachineKind.RANDOM_FOREST_CLASSIFIER: lambda p, seed: RandomForestClassifier(
        p["n_trees"], p["max_depth"], p["min_leaf"], p["max_features"], p["bootstrap"], seed),
    MachineKind.LOGISTIC_REGRESSION: lambda p, seed: LogisticRegressionClassifier(
        p["regularization"], p["step"], p["n_iter"]),
    MachineKind.NAIVE_BAYES: lambda p, seed: GaussianNaiveBayes(p["var_smoothing"]),
}


class TrainedMachine:
    """A fitted machine r_{k,m}: a name and a pointwise prediction function."""

    def __init__(
        self,
        name: str,
        predict_fn: PredictFn,
        n_features: int,
        is_classifier: bool = False,
        spec: Optional[MachineSpec] = None,
        learner: Optional[Learner] = None,
    ):
        self.name = name
        self.n_features = n_features
        self.is_classifier = is_classifier
        self.spec = spec
        self.learner = learner
        self._predict_fn = predict_fn

    @property
    def converged(self) -> bool:
        return self.learner.converged_ if self.learner is not None else True

    @property
    def warnings(self) -> List[str]:
        return list(self.learner.warnings_) if self.learner is not None else []

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        """Predictions for every row of X."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise ShapeError(
                f"Machine '{self.name}' expects {self.n_features} features, got {X.shape[1]}"
            )
        predictions = np.asarray(self._predict_fn(X))
        if predictions.shape != (X.shape[0],):
            raise ShapeError(f"Machine '{self.name}' returned shape {predictions.shape}")
        if not np.all(np.isfinite(predictions)):
            raise MachineOutputError(self.name)
        return predictions

    def __repr__(self) -> str:
        return f"TrainedMachine(name={self.name!r}, n_features={self.n_features})"


def fit_machine(spec: MachineSpec, train: Dataset) -> TrainedMachine:
    """Fit one machine on the training half.

    Args:
        spec: Kind, hyperparameters and seed
        train: D_k; targets are required, integer labels for classifiers

    Returns:
        The fitted machine
    """
    if train.targets is None:
        raise ValueError("Machines need a training set with targets")
    if spec.is_classifier and not train.is_labelled:
        raise LabelError(f"{spec.kind.value} needs integer class labels")

    learner = _FACTORIES[spec.kind](spec.params, spec.seed)
    learner.fit(train.features, train.targets)
    for message in learner.warnings_:
        logger.warning(f"{spec.display_name}: {message}")
    logger.debug(f"Fitted {spec.display_name} on {train.n} rows")
    return TrainedMachine(
        name=spec.display_name,
        predict_fn=learner.predict,
        n_features=train.d,
        is_classifier=spec.is_classifier,
        spec=spec,
        learner=learner,
    )


def fit_machines(specs: Sequence[MachineSpec], train: Dataset, n_jobs: int = 1) -> List[TrainedMachine]:
    """Fit a roster of machines; names are made unique by suffixing repeats."""
    if n_jobs == 1:
        machines = [fit_machine(spec, train) for spec in specs]
    else:
        machines = Parallel(n_jobs=n_jobs, prefer="threads")(
            delayed(fit_machine)(spec, train) for spec in specs
        )
    seen: Dict[str, int] = {}
    for machine in machines:
        count = seen.get(machine.name, 0) + 1
        seen[machine.name] = count
        if count > 1:
            machine.name = f"{machine.name}-{count}"
    return machines


def load_machine(name: str, predict_fn: PredictFn, n_features: int,
                 is_classifier: bool = False) -> TrainedMachine:
    """Wrap an externally fitted estimator (trained on D_k only) as a machine.

    `predict_fn` maps an (n, d) array to n predictions.
    """
    return TrainedMachine(name=name, predict_fn=predict_fn, n_features=n_features,
                          is_classifier=is_classifier)


def machine_predict(machine: TrainedMachine, x: np.ndarray) -> Union[float, int]:
    """Prediction r_{k,m}(x) at a single point."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ShapeError(f"Expected a single d-vector, got shape {x.shape}")
    value = machine.predict_batch(x[None, :])[0]
    return int(value) if machine.is_classifier else float(value)


def default_regression_roster(seed: int = 0) -> List[MachineSpec]:
    """Ridge, lasso, decision tree and random forest."""
    return [
        MachineSpec(kind=MachineKind.RIDGE, seed=seed),
        MachineSpec(kind=MachineKind.LASSO, seed=seed),
        MachineSpec(kind=MachineKind.DECISION_TREE, seed=seed),
        MachineSpec(kind=MachineKind.RANDOM_FOREST, seed=seed),
    ]


def default_classification_roster(seed: int = 0) -> List[MachineSpec]:
    """k-NN, decision tree, logistic regression and naive Bayes."""
    return [
        MachineSpec(kind=MachineKind.KNN_CLASSIFIER, seed=seed),
        MachineSpec(kind=MachineKind.DECISION_TREE_CLASSIFIER, seed=seed),
        MachineSpec(kind=MachineKind.LOGISTIC_REGRESSION, seed=seed),
        MachineSpec(kind=MachineKind.NAIVE_BAYES, seed=seed),
    ]
