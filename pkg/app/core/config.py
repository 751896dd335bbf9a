"""
Application settings.
"""
from typing import List, Optional

from pydantic import ConfigDict
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Application and benchmark configuration, read from the environment and `.env`."""

    model_config = ConfigDict(
        env_file=".env",
        case_sensitive=True,
        extra="ignore"
    )

    PROJECT_NAME: str = "Cobra Aggregation API"
    VERSION: str = "0.1.0"
    DESCRIPTION: str = "Consensus-based aggregation of regressors and classifiers"
    API_V1_STR: str = "/api/v1"

    # CORS
    ALLOWED_HOSTS: List[str] = ["*"]

    # Seeds: COBRA_SEED overrides every seed given in a config file or on the CLI
    COBRA_SEED: Optional[int] = None
    DEFAULT_SEED: int = 42

    # Fitted model served by the prediction endpoints
    MODEL_DIR: Optional[str] = None

    LOG_LEVEL: str = "INFO"
    # joblib workers used by the CLI for machine fitting and grid search
    N_JOBS: int = 1

    def effective_seed(self, seed: Optional[int] = None) -> int:
        """Resolve the seed to use: env override, then caller value, then default."""
        if self.COBRA_SEED is not None:
            return self.COBRA_SEED
        if seed is not None:
            return seed
        return self.DEFAULT_SEED


settings = Settings()
