"""
Schemas for kernels, weight vectors and aggregator configuration.
"""
from enum import Enum
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.errors import InvalidWeightsError

WEIGHT_TOLERANCE = 1e-9


class KernelKind(str, Enum):
    """Scalar proximity kernels K(a, b)."""
    EXPONENTIAL = "exponential"
    GAUSSIAN = "gaussian"
    THRESHOLD = "threshold"
    TRIANGULAR = "triangular"


class KernelSpec(BaseModel):
    """Kernel kind and bandwidth (lambda for exponential/gaussian, epsilon otherwise)."""

    model_config = ConfigDict(frozen=True)

    kind: KernelKind = KernelKind.EXPONENTIAL
    bandwidth: float = Field(1.0, gt=0, allow_inf_nan=False)


class EstimatorKind(str, Enum):
    """Aggregate estimators."""
    COBRA = "cobra"
    KERNELCOBRA = "kernelcobra"
    GENERAL_KERNEL = "general-kernel"
    MIXCOBRA = "mixcobra"
    UNSUPERVISED = "unsupervised"
    CLASSIFIER = "classifier"


class PointWeighting(str, Enum):
    """Weight scheme feeding the unsupervised and classifier estimators."""
    KERNELCOBRA = "kernelcobra"
    GENERAL_KERNEL = "general-kernel"
    COBRA = "cobra"
    LABEL_AGREEMENT = "label-agreement"


class WeightVector(BaseModel):
    """Nonnegative weights over the l retained points, summing to one."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    weights: np.ndarray

    @field_validator("weights", mode="before")
    @classmethod
    def _coerce(cls, v):
        return np.array(v, dtype=float).reshape(-1)

    @model_validator(mode="after")
    def _check(self) -> "WeightVector":
        w = self.weights
        if w.size == 0:
            raise ValueError("Weight vector is empty")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("Weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > WEIGHT_TOLERANCE:
            raise ValueError(f"Weights sum to {w.sum()!r}, expected 1")
        w.setflags(write=False)
        return self

    def __len__(self) -> int:
        return self.weights.shape[0]

    def to_list(self) -> List[float]:
        return self.weights.tolist()


class AggregatorConfig(BaseModel):
    """Hyperparameters of every aggregate estimator."""

    model_config = ConfigDict(populate_by_name=True)

    lambda_: float = Field(1.0, alias="lambda", ge=0, allow_inf_nan=False,
                           description="Temperature of the exponential weights")
    epsilon: float = Field(0.1, gt=0, allow_inf_nan=False,
                           description="COBRA proximity threshold")
    alpha: Optional[int] = Field(None, ge=1,
                                 description="Minimum number of agreeing machines; None means all")
    alpha_in: float = Field(1.0, ge=0, allow_inf_nan=False,
                            description="Input-space temperature of the MixCobra baseline")
    kernel: KernelSpec = Field(default_factory=KernelSpec)
    machine_weights: Optional[List[float]] = Field(None, description="W_{n,m}; uniform when omitted")
    point_weights: PointWeighting = PointWeighting.KERNELCOBRA
    uniform_fallback: bool = False

    @field_validator("machine_weights")
    @classmethod
    def _check_machine_weights(cls, v):
        if v is None:
            return v
        array = np.asarray(v, dtype=float)
        if np.any(array < 0) or abs(array.sum() - 1.0) > WEIGHT_TOLERANCE:
            raise ValueError("machine_weights must be nonnegative and sum to 1")
        return v

    def resolved_alpha(self, n_machines: int) -> int:
        alpha = n_machines if self.alpha is None else self.alpha
        if not 1 <= alpha <= n_machines:
            raise ValueError(f"alpha must lie in [1, {n_machines}], got {alpha}")
        return alpha

    def resolved_machine_weights(self, n_machines: int) -> np.ndarray:
        if self.machine_weights is None:
            return np.full(n_machines, 1.0 / n_machines)
        if len(self.machine_weights) != n_machines:
            raise InvalidWeightsError(f"Expected {n_machines} machine weights, got {len(self.machine_weights)}")
        return np.asarray(self.machine_weights, dtype=float)
