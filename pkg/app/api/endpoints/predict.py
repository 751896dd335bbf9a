"""
API endpoints for aggregate predictions.
"""
import logging

from fastapi import APIRouter, Depends, HTTPException, status

from app.core.errors import CobraError, NoConsensusError
from app.schemas.api import ModelInfo, PredictRequest, PredictResponse, WeightsRequest, WeightsResponse
from app.services.model_service import ModelService, get_model_service

logger = logging.getLogger(__name__)

router = APIRouter()


def _require_ready(service: ModelService) -> None:
    if not service.is_ready:
        raise HTTPException(
            status_code=status.HTTP_503_SERVICE_UNAVAILABLE,
            detail="No model loaded; set MODEL_DIR to a directory written by `cobra fit`"
        )


def _to_http(e: Exception) -> HTTPException:
    if isinstance(e, NoConsensusError):
        return HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=str(e))
    return HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(e))


@router.get(
    "/model",
    response_model=ModelInfo,
    summary="Served model",
    description="Metadata of the fitted aggregate behind the prediction endpoints"
)
async def model_info(service: ModelService = Depends(get_model_service)) -> ModelInfo:
    """Describe the loaded model."""
    return ModelInfo(ready=service.is_ready, metadata=service.metadata)


@router.post(
    "/",
    response_model=PredictResponse,
    summary="Predict a batch",
    description="Aggregate predictions for a batch of feature rows"
)
async def predict(
    request: PredictRequest,
    service: ModelService = Depends(get_model_service)
) -> PredictResponse:
    """Predict every row of the request."""
    _require_ready(service)
    try:
        predictions = service.predict(request.rows)
    except (CobraError, ValueError) as e:
        logger.error(f"Prediction failed: {e}")
        raise _to_http(e)
    return PredictResponse(estimator=service.aggregator.kind.value, predictions=predictions)


@router.post(
    "/weights",
    response_model=WeightsResponse,
    summary="Weights for one query",
    description="Weights the aggregate puts on each retained training point"
)
async def weights(
    request: WeightsRequest,
    service: ModelService = Depends(get_model_service)
) -> WeightsResponse:
    """Return the weight vector for one row."""
    _require_ready(service)
    try:
        values = service.weights(request.row)
    except (CobraError, ValueError) as e:
        logger.error(f"Weight computation failed: {e}")
        raise _to_http(e)
    return WeightsResponse(
        estimator=service.aggregator.kind.value,
        weights=values,
        retained_index=service.aggregator.split.retained_half.index.tolist(),
    )
