"""
Schemas for hyperparameter grids, tuning results and error reports.
"""
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

TunableParameter = Literal["lambda", "epsilon", "alpha", "bandwidth", "alpha_in"]


class GridSpec(BaseModel):
    """Candidate values for one aggregator parameter."""
    parameter: TunableParameter
    values: Optional[List[float]] = Field(None, description="Explicit candidates")
    scale: Literal["list", "log", "linear"] = "list"
    low: Optional[float] = None
    high: Optional[float] = None
    num: Optional[int] = Field(None, ge=1)

    @model_validator(mode="after")
    def _check(self) -> "GridSpec":
        if self.scale == "list":
            if not self.values:
                raise ValueError(f"Grid for {self.parameter} has no candidates")
        else:
            if self.low is None or self.high is None or self.num is None:
                raise ValueError(f"{self.scale} grid for {self.parameter} needs low, high and num")
            if self.scale == "log" and (self.low <= 0 or self.high <= 0):
                raise ValueError("Log grids need positive bounds")
            if self.low > self.high:
                raise ValueError("Grid lower bound exceeds the upper bound")
        for value in self.candidates():
            if value < 0 or not np.isfinite(value):
                raise ValueError(f"Invalid candidate {value} for {self.parameter}")
            if self.parameter in ("epsilon", "bandwidth") and value <= 0:
                raise ValueError(f"{self.parameter} candidates must be positive")
            if self.parameter == "alpha" and (value < 1 or value != int(value)):
                raise ValueError("alpha candidates must be positive integers")
        return self

    def candidates(self) -> List[float]:
        """Sorted, de-duplicated candidate values."""
        if self.scale == "list":
            raw = self.values
        elif self.scale == "log":
            raw = np.logspace(np.log10(self.low), np.log10(self.high), self.num)
        else:
            raw = np.linspace(self.low, self.high, self.num)
        return sorted({float(v) for v in raw})

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        """Parse `lambda=log:1e-3:1e3:50`, `epsilon=lin:0.01:1:20` or `alpha=1,2,3`."""
        name, sep, body = text.partition("=")
        if not sep or not body:
            raise ValueError(f"Grid '{text}' is not of the form name=values")
        name = name.strip()
        if body.startswith(("log:", "lin:", "linear:")):
            scale, low, high, num = body.split(":")
            return cls(parameter=name, scale="log" if scale == "log" else "linear",
                       low=float(low), high=float(high), num=int(num))
        return cls(parameter=name, values=[float(v) for v in body.split(",")])


class CandidateResult(BaseModel):
    """Cross-validated loss of one parameter combination."""
    params: Dict[str, float]
    mean_loss: Optional[float] = None
    std_loss: Optional[float] = None
    fold_losses: List[float] = Field(default_factory=list)
    no_consensus_fraction: float = 0.0
    feasible: bool = True


class TuneResult(BaseModel):
    """Outcome of a grid search."""
    estimator: str
    best_params: Dict[str, float]
    best_loss: float
    loss: Literal["rmse", "misclassification"]
    folds: int
    seed: int
    candidates: List[CandidateResult]


class ModelErrors(BaseModel):
    """Per-point errors and their summary for one model."""
    name: str
    predictions: List[float] = Field(default_factory=list)
    absolute_errors: List[float]
    squared_errors: List[float]
    rmse: float
    mae: float
    error_std: float
    quantiles: Dict[str, float] = Field(default_factory=dict)


class ErrorReport(BaseModel):
    """Errors of several models on a common test set."""
    n_points: int
    y_true: List[float] = Field(default_factory=list)
    models: List[ModelErrors]

    def summary_rows(self) -> List[Dict[str, Any]]:
        return [
            {"model": m.name, "rmse": m.rmse, "mae": m.mae, "error_std": m.error_std}
            for m in self.models
        ]
