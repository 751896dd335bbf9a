"""
Schemas for base machines (the preliminary estimators r_{k,m}).
"""
from enum import Enum
from typing import Any, Dict, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class MachineKind(str, Enum):
    """Learners available as machines."""
    RIDGE = "ridge"
    LASSO = "lasso"
    KNN = "knn"
    DECISION_TREE = "decision-tree"
    RANDOM_FOREST = "random-forest"
    KNN_CLASSIFIER = "knn-classifier"
    DECISION_TREE_CLASSIFIER = "decision-tree-classifier"
    RANDOM_FOREST_CLASSIFIER = "random-forest-classifier"
    LOGISTIC_REGRESSION = "logistic-regression"
    NAIVE_BAYES = "naive-bayes"

    @property
    def is_classifier(self) -> bool:
        return self in CLASSIFIER_KINDS


CLASSIFIER_KINDS = frozenset({
    MachineKind.KNN_CLASSIFIER,
    MachineKind.DECISION_TREE_CLASSIFIER,
    MachineKind.RANDOM_FOREST_CLASSIFIER,
    MachineKind.LOGISTIC_REGRESSION,
    MachineKind.NAIVE_BAYES,
})

_TREE_DEFAULTS: Dict[str, Any] = {"max_depth": 10, "min_leaf": 1, "max_features": None}
_FOREST_DEFAULTS: Dict[str, Any] = {**_TREE_DEFAULTS, "n_trees": 100, "bootstrap": True}

DEFAULT_HYPERPARAMETERS: Dict[MachineKind, Dict[str, Any]] = {
    MachineKind.RIDGE: {"regularization": 1.0},
    MachineKind.LASSO: {"regularization": 0.1, "tol": 1e-6, "max_iter": 1000},
    MachineKind.KNN: {"n_neighbors": 5},
    MachineKind.DECISION_TREE: dict(_TREE_DEFAULTS),
    MachineKind.RANDOM_FOREST: dict(_FOREST_DEFAULTS),
    MachineKind.KNN_CLASSIFIER: {"n_neighbors": 5},
    MachineKind.DECISION_TREE_CLASSIFIER: dict(_TREE_DEFAULTS),
    MachineKind.RANDOM_FOREST_CLASSIFIER: dict(_FOREST_DEFAULTS),
    MachineKind.LOGISTIC_REGRESSION: {"regularization": 1e-3, "step": 0.1, "n_iter": 500},
    MachineKind.NAIVE_BAYES: {"var_smoothing": 1e-9},
}

# Lower bounds; None is always allowed, and max_features also takes "all" (no subsampling)
_MINIMUMS: Dict[str, float] = {
    "regularization": 0.0,
    "tol": 0.0,
    "max_iter": 1,
    "n_neighbors": 1,
    "max_depth": 0,
    "min_leaf": 1,
    "max_features": 1,
    "n_trees": 1,
    "step": 0.0,
    "n_iter": 1,
    "var_smoothing": 0.0,
}


class MachineSpec(BaseModel):
    """A machine to fit: kind, hyperparameters (merged over the defaults) and seed."""

    model_config = ConfigDict(use_enum_values=False)

    kind: MachineKind
    hyperparameters: Dict[str, Any] = Field(default_factory=dict)
    seed: int = 0
    name: Optional[str] = Field(None, description="Display name; defaults to the kind")

    @model_validator(mode="after")
    def _check_hyperparameters(self) -> "MachineSpec":
        defaults = DEFAULT_HYPERPARAMETERS[self.kind]
        unknown = set(self.hyperparameters) - set(defaults)
        if unknown:
            raise ValueError(f"Unknown hyperparameters for {self.kind.value}: {sorted(unknown)}")
        for key, value in self.hyperparameters.items():
            if value is None or isinstance(value, bool):
                continue
            if key == "max_features" and value == "all":
                continue
            if isinstance(value, str):
                raise ValueError(f"{self.kind.value}.{key} must be a number, got {value!r}")
            minimum = _MINIMUMS.get(key)
            if minimum is not None and value < minimum:
                raise ValueError(f"{self.kind.value}.{key} must be >= {minimum}, got {value}")
        return self

    @property
    def params(self) -> Dict[str, Any]:
        """Defaults overlaid with the explicit hyperparameters."""
        return {**DEFAULT_HYPERPARAMETERS[self.kind], **self.hyperparameters}

    @property
    def display_name(self) -> str:
        return self.name or self.kind.value

    @property
    def is_classifier(self) -> bool:
        return self.kind.is_classifier
