"""
Schemas for benchmark configuration and reports.
"""
import json
from pathlib import Path
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field, ValidationError, model_validator

from app.core.errors import ConfigError
from app.schemas.aggregation import AggregatorConfig, EstimatorKind
from app.schemas.datagen import MIN_DIMENSION, GeneratorKind, GeneratorSpec
from app.schemas.machine import MachineSpec
from app.schemas.tuning import GridSpec


class DatasetSource(BaseModel):
    """A benchmark dataset: a generator or a user-supplied CSV file."""
    name: str
    generator: Optional[GeneratorSpec] = None
    csv_path: Optional[str] = None
    target_column: str = "y"
    task: Literal["regression", "classification"] = "regression"

    @model_validator(mode="after")
    def _check_source(self) -> "DatasetSource":
        if (self.generator is None) == (self.csv_path is None):
            raise ValueError(f"Dataset '{self.name}' needs exactly one of generator or csv_path")
        if self.generator is not None and self.generator.kind.is_classification:
            self.task = "classification"
        return self


class EstimatorEntry(BaseModel):
    """An aggregate estimator in the roster, with fixed parameters or tune directives."""
    name: str
    kind: EstimatorKind
    config: AggregatorConfig = Field(default_factory=AggregatorConfig)
    tune: List[GridSpec] = Field(default_factory=list)
    use_default_grids: bool = False


class BenchConfig(BaseModel):
    """Everything needed to reproduce a benchmark."""
    datasets: List[DatasetSource] = Field(..., min_length=1)
    estimators: List[EstimatorEntry] = Field(..., min_length=1)
    machines: List[MachineSpec] = Field(default_factory=list)
    runs: int = Field(20, ge=1)
    test_fraction: float = Field(0.25, gt=0, lt=1)
    seed: int = 42
    reuse_seed: bool = Field(False, description="Run every repetition with the same seed")
    folds: int = Field(5, ge=2)
    output_dir: str = "bench-output"
    n_jobs: int = Field(1, description="joblib workers for independent runs")

    @classmethod
    def from_file(cls, path: str | Path) -> "BenchConfig":
        """Load and validate a JSON config, checking referenced CSV files exist."""
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"Config file not found: {path}")
        try:
            config = cls.model_validate(json.loads(path.read_text(encoding="utf-8")))
        except (ValidationError, json.JSONDecodeError) as e:
            raise ConfigError(f"Invalid bench config {path}: {e}") from e
        for source in config.datasets:
            if source.csv_path is not None:
                csv_path = Path(source.csv_path)
                if not csv_path.is_absolute():
                    csv_path = path.parent / csv_path
                if not csv_path.is_file():
                    raise ConfigError(f"Dataset file not found: {csv_path}")
                source.csv_path = str(csv_path)
        return config


class RunRecord(BaseModel):
    """One successful repetition on one dataset."""
    dataset: str
    run: int
    seed: int
    rmse: Dict[str, float]
    tuned_params: Dict[str, Dict[str, float]] = Field(default_factory=dict)


class FailedRun(BaseModel):
    """A repetition that raised; never silently dropped."""
    dataset: str
    run: int
    seed: int
    error_type: str
    message: str


class SummaryRow(BaseModel):
    """Mean and standard deviation of one model's RMSE over the successful runs."""
    dataset: str
    model: str
    mean_rmse: float
    std_rmse: float
    n_runs: int
    best: bool = False


class PhaseTiming(BaseModel):
    """Wall-clock seconds spent per phase in one run."""
    dataset: str
    run: int
    fit_machines: float = 0.0
    build_matrix: float = 0.0
    tune: float = 0.0
    predict: float = 0.0


class RunPredictions(BaseModel):
    """Test-set targets, predictions and absolute errors of every model in one run."""
    dataset: str
    run: int
    y_true: List[float]
    predictions: Dict[str, List[float]]
    abs_errors: Dict[str, List[float]]


class BenchReport(BaseModel):
    """Result of an RMSE benchmark."""
    runs_requested: int
    summary: List[SummaryRow]
    runs: List[RunRecord]
    failures: List[FailedRun] = Field(default_factory=list)
    predictions: List[RunPredictions] = Field(default_factory=list, description="One entry per successful run")
    timings: List[PhaseTiming] = Field(default_factory=list)


class TimingSweep(BaseModel):
    """The swept quantity of a timing benchmark."""
    variable: Literal["d", "ell", "machines"]
    values: List[int] = Field(..., min_length=1)

    @model_validator(mode="after")
    def _check_values(self) -> "TimingSweep":
        minimum = MIN_DIMENSION[GeneratorKind.FRIEDMAN1] if self.variable == "d" else 1
        too_small = [v for v in self.values if v < minimum]
        if too_small:
            raise ValueError(f"{self.variable} sweep values must be >= {minimum}, got {too_small}")
        return self

    @classmethod
    def parse(cls, text: str) -> "TimingSweep":
        """Parse `d=10,100,1000`."""
        name, sep, body = text.partition("=")
        if not sep:
            raise ValueError(f"Sweep '{text}' is not of the form name=v1,v2,...")
        return cls(variable=name.strip(), values=[int(v) for v in body.split(",")])


class TimingRow(BaseModel):
    """Median and spread of the per-query time for one estimator at one sweep value."""
    variable: str
    value: int
    estimator: str
    aggregation_median: float
    aggregation_std: float
    end_to_end_median: float
    end_to_end_std: float
