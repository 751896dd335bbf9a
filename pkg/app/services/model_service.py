"""Model service module: persistence of fitted aggregates and the model served by the API."""

import asyncio
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import joblib
import numpy as np

from app.core.config import settings
from app.core.errors import ConfigError, ShapeError
from app.services.aggregation_service import CobraAggregator

logger = logging.getLogger(__name__)

MODEL_FILE = "model.joblib"
METADATA_FILE = "metadata.json"


def model_metadata(aggregator: CobraAggregator) -> Dict[str, Any]:
    """JSON-friendly description of a fitted aggregate."""
    return {
        "estimator": aggregator.kind.value,
        "config": aggregator.config.model_dump(mode="json", by_alias=True),
        "machines": [machine.name for machine in aggregator.machines],
        "n_features": aggregator.n_features,
        "k": aggregator.split.k,
        "ell": aggregator.split.ell,
    }


def save_model(aggregator: CobraAggregator, model_dir: Union[str, Path]) -> Path:
    """Dump a fitted aggregate and its metadata into `model_dir`.

    Machines wrapping external callables must be picklable to be saved.
    """
    model_dir = Path(model_dir)
    model_dir.mkdir(parents=True, exist_ok=True)
    joblib.dump(aggregator, model_dir / MODEL_FILE)
    (model_dir / METADATA_FILE).write_text(json.dumps(model_metadata(aggregator), indent=2), encoding="utf-8")
    logger.info(f"Saved {aggregator.kind.value} model to {model_dir}")
    return model_dir


def load_model(model_dir: Union[str, Path]) -> CobraAggregator:
    """Load an aggregate written by save_model."""
    path = Path(model_dir) / MODEL_FILE
    if not path.is_file():
        raise ConfigError(f"No model found in {model_dir}")
    aggregator = joblib.load(path)
    if not isinstance(aggregator, CobraAggregator):
        raise ConfigError(f"{path} does not hold a fitted aggregate")
    logger.info(f"Loaded {aggregator.kind.value} model from {model_dir}")
    return aggregator


class ModelService:
    """Service holding the fitted aggregate behind the prediction endpoints."""

    def __init__(self, model_dir: Optional[str] = None):
        self.model_dir = model_dir
        self.aggregator: Optional[CobraAggregator] = None
        self.metadata: Dict[str, Any] = {}

    @classmethod
    async def create(cls, model_dir: Optional[str] = None) -> "ModelService":
        """Asynchronous factory: build the service and load the configured model, if any.

        Returns:
            A ModelService, ready when a model directory is configured and valid
        """
        service = cls(model_dir or settings.MODEL_DIR)
        if service.model_dir:
            try:
                service.aggregator = await asyncio.to_thread(load_model, service.model_dir)
                service.metadata = model_metadata(service.aggregator)
            except Exception as e:
                logger.error(f"Could not load model from {service.model_dir}: {e}")
        else:
            logger.warning("MODEL_DIR is not set; prediction endpoints are unavailable")
        return service

    @property
    def is_ready(self) -> bool:
        return self.aggregator is not None

    def _require_model(self) -> CobraAggregator:
        if self.aggregator is None:
            raise RuntimeError("No model loaded")
        return self.aggregator

    def predict(self, rows: List[List[float]]) -> List[Union[float, int]]:
        """Aggregate predictions for a batch of feature rows."""
        return self._require_model().predict_batch(np.asarray(rows, dtype=float)).tolist()

    def weights(self, row: List[float]) -> List[float]:
        """Weights over the retained points for one feature row."""
        aggregator = self._require_model()
        x = np.asarray(row, dtype=float)
        if x.shape != (aggregator.n_features,):
            raise ShapeError(f"Expected {aggregator.n_features} features, got {x.size}")
        return aggregator.weights(x).to_list()


# Singleton instance
_model_service = None


async def get_model_service() -> ModelService:
    """Get or create the model service singleton asynchronously.

    Returns:
        The model service instance
    """
    global _model_service
    if _model_service is None:
        _model_service = await ModelService.create()
    return _model_service
