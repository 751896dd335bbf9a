"""
Dataset containers: rows, the D_k / D_l split and cached machine predictions.
"""
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.errors import ShapeError


def _as_float_matrix(value) -> np.ndarray:
    array = np.array(value, dtype=float)
    if array.ndim == 1:
        array = array.reshape(-1, 1)
    if array.ndim != 2:
        raise ShapeError(f"Expected a 2-d feature matrix, got {array.ndim} dimensions")
    return array


def _as_target_vector(value) -> np.ndarray:
    array = np.array(value)
    if array.ndim != 1:
        raise ShapeError(f"Expected a 1-d target vector, got {array.ndim} dimensions")
    if array.dtype.kind in "iub":
        return array.astype(np.int64)
    return array.astype(float)


class Dataset(BaseModel):
    """n x d feature matrix with optional targets (real outputs or integer labels)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    features: np.ndarray
    targets: Optional[np.ndarray] = None
    # Row indices in the source dataset, kept through splits
    index: Optional[np.ndarray] = None

    @field_validator("features", mode="before")
    @classmethod
    def _coerce_features(cls, v):
        return _as_float_matrix(v)

    @field_validator("targets", mode="before")
    @classmethod
    def _coerce_targets(cls, v):
        return None if v is None else _as_target_vector(v)

    @model_validator(mode="after")
    def _check_shapes(self) -> "Dataset":
        n, d = self.features.shape
        if n < 1 or d < 1:
            raise ShapeError(f"Dataset needs n >= 1 and d >= 1, got n={n}, d={d}")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("Feature matrix contains NaN or infinite entries")
        if self.targets is not None:
            if self.targets.shape[0] != n:
                raise ShapeError(f"Targets have length {self.targets.shape[0]}, expected {n}")
            if not np.all(np.isfinite(self.targets)):
                raise ValueError("Targets contain NaN or infinite entries")
        if self.index is None:
            object.__setattr__(self, "index", np.arange(n))
        elif len(self.index) != n:
            raise ShapeError("Row index length does not match the row count")
        self.features.setflags(write=False)
        if self.targets is not None:
            self.targets.setflags(write=False)
        return self

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def has_targets(self) -> bool:
        return self.targets is not None

    @property
    def is_labelled(self) -> bool:
        """True when targets are integer class labels."""
        return self.targets is not None and self.targets.dtype.kind == "i"

    def row(self, i: int) -> np.ndarray:
        return self.features[i]

    def take(self, indices) -> "Dataset":
        """Subset of rows, keeping their original indices."""
        indices = np.asarray(indices, dtype=int)
        return Dataset(
            features=self.features[indices].copy(),
            targets=None if self.targets is None else self.targets[indices].copy(),
            index=self.index[indices].copy(),
        )


class SplitPair(BaseModel):
    """The two halves D_k (machines are fitted on it) and D_l (its points get weighted)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    train_half: Dataset
    retained_half: Dataset

    @property
    def k(self) -> int:
        return self.train_half.n

    @property
    def ell(self) -> int:
        return self.retained_half.n


class PredictionMatrix(BaseModel):
    """M x l table: entry (m, i) is machine m's prediction at retained point i."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray
    machine_names: List[str] = Field(default_factory=list)

    @field_validator("values", mode="before")
    @classmethod
    def _coerce_values(cls, v):
        array = np.array(v, dtype=float)
        if array.ndim != 2:
            raise ShapeError(f"Prediction matrix must be 2-d, got {array.ndim} dimensions")
        return array

    @model_validator(mode="after")
    def _check(self) -> "PredictionMatrix":
        if not np.all(np.isfinite(self.values)):
            raise ValueError("Prediction matrix contains non-finite entries")
        if self.machine_names and len(self.machine_names) != self.values.shape[0]:
            raise ShapeError("One machine name per matrix row is required")
        self.values.setflags(write=False)
        return self

    @property
    def n_machines(self) -> int:
        return self.values.shape[0]

    @property
    def ell(self) -> int:
        return self.values.shape[1]

    def value_range(self) -> float:
        """max - min over all entries."""
        return float(np.ptp(self.values)) if self.values.size else 0.0
