"""
Schemas for the synthetic dataset generators.
"""
from enum import Enum
from typing import Optional

from pydantic import BaseModel, Field, model_validator


class GeneratorKind(str, Enum):
    """Synthetic dataset families."""
    LINEAR_GAUSSIAN = "linear-gaussian"
    FRIEDMAN1 = "friedman1"
    SPARSE_UNCORRELATED = "sparse-uncorrelated"
    MOONS = "moons"
    CIRCLES = "circles"
    LINEARLY_SEPARABLE = "linearly-separable"

    @property
    def is_classification(self) -> bool:
        return self in (GeneratorKind.MOONS, GeneratorKind.CIRCLES, GeneratorKind.LINEARLY_SEPARABLE)


# Smallest admissible dimension per kind
MIN_DIMENSION = {
    GeneratorKind.LINEAR_GAUSSIAN: 1,
    GeneratorKind.FRIEDMAN1: 5,
    GeneratorKind.SPARSE_UNCORRELATED: 4,
}


class GeneratorSpec(BaseModel):
    """What to generate: kind, size, dimension, noise level and seed."""
    kind: GeneratorKind
    n: int = Field(..., ge=1)
    d: Optional[int] = Field(None, ge=1, description="Ignored (must be 2 or unset) for 2-d classification sets")
    noise: float = Field(0.0, ge=0, allow_inf_nan=False)
    seed: int = 0

    @model_validator(mode="after")
    def _check_dimension(self) -> "GeneratorSpec":
        if self.kind.is_classification:
            if self.d not in (None, 2):
                raise ValueError(f"{self.kind.value} is 2-dimensional, got d={self.d}")
            return self
        minimum = MIN_DIMENSION[self.kind]
        if self.d is None:
            self.d = max(minimum, 10) if self.kind != GeneratorKind.SPARSE_UNCORRELATED else 4
        if self.d < minimum:
            raise ValueError(f"{self.kind.value} requires d >= {minimum}, got d={self.d}")
        return self

    @property
    def dimension(self) -> int:
        return 2 if self.kind.is_classification else self.d
