"""
Main API router.
"""
from fastapi import APIRouter

from app.api.endpoints import health, predict

api_router = APIRouter()

api_router.include_router(health.router, prefix="/health", tags=["health"])
api_router.include_router(predict.router, prefix="/predict", tags=["predict"])
