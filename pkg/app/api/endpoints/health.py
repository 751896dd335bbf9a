"""
Health endpoints.
"""
from typing import Any, Dict

from fastapi import APIRouter, Depends, status
from pydantic import BaseModel

from app.core.config import settings
from app.services.model_service import ModelService, get_model_service


class HealthResponse(BaseModel):
    """Health check response."""
    status: str
    message: str


router = APIRouter()


@router.get(
    "/",
    response_model=HealthResponse,
    status_code=status.HTTP_200_OK,
    summary="Health Check",
    description="Check that the API process is up"
)
def health_check() -> HealthResponse:
    """Liveness endpoint."""
    return HealthResponse(
        status="healthy",
        message="The API is running"
    )


@router.get(
    "/ready",
    response_model=Dict[str, Any],
    status_code=status.HTTP_200_OK,
    summary="Readiness Check",
    description="Report whether a fitted model is loaded"
)
async def readiness_check(service: ModelService = Depends(get_model_service)) -> Dict[str, Any]:
    """Readiness endpoint; `model_loaded` is false until MODEL_DIR points at a saved model."""
    return {
        "status": "ready" if service.is_ready else "no-model",
        "model_loaded": service.is_ready,
        "version": settings.VERSION
    }
