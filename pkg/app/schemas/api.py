"""
Request and response payloads of the prediction API.
"""
from typing import Any, Dict, List, Union

from pydantic import BaseModel, Field


class PredictRequest(BaseModel):
    """Batch of feature rows to predict."""
    rows: List[List[float]] = Field(..., min_length=1, description="Feature rows, d values each")


class PredictResponse(BaseModel):
    """Aggregate predictions, one per input row."""
    estimator: str
    predictions: List[Union[int, float]]


class WeightsRequest(BaseModel):
    """A single query point."""
    row: List[float] = Field(..., min_length=1)


class WeightsResponse(BaseModel):
    """Weights over the retained points for one query."""
    estimator: str
    weights: List[float]
    retained_index: List[int] = Field(..., description="Source row index of each retained point")


class ModelInfo(BaseModel):
    """Metadata of the served model."""
    ready: bool
    metadata: Dict[str, Any] = Field(default_factory=dict)
