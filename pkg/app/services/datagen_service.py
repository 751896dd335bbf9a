"""
Synthetic dataset generators and CSV ingestion.
"""
import logging
import math
from pathlib import Path
from typing import Literal, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from app.core.errors import CsvParseError, GenerationError, SchemaError
from app.schemas.datagen import GeneratorKind, GeneratorSpec
from app.schemas.dataset import Dataset

logger = logging.getLogger(__name__)

CIRCLES_FACTOR = 0.5
BLOB_CENTER = 2.0


def make_spec(**fields) -> GeneratorSpec:
    """Build a GeneratorSpec, turning validation failures into GenerationError."""
    try:
        return GeneratorSpec(**fields)
    except ValidationError as e:
        raise GenerationError(f"Invalid generator spec: {e}") from e


def _linear_gaussian(spec: GeneratorSpec, rng: np.random.Generator):
    d = spec.dimension
    X = rng.standard_normal((spec.n, d))
    coefficients = np.zeros(d)
    informative = math.ceil(d / 2)
    coefficients[:informative] = rng.uniform(0.0, 100.0, informative)
    y = X @ coefficients + spec.noise * rng.standard_normal(spec.n)
    return X, y


def friedman1_target(X: np.ndarray) -> np.ndarray:
    """Noise-free Friedman #1 response; only the first five columns matter."""
    return (10 * np.sin(np.pi * X[:, 0] * X[:, 1]) + 20 * (X[:, 2] - 0.5) ** 2
            + 10 * X[:, 3] + 5 * X[:, 4])


def sparse_uncorrelated_target(X: np.ndarray) -> np.ndarray:
    return X[:, 0] + 2 * X[:, 1] - 2 * X[:, 2] - 1.5 * X[:, 3]


def _friedman1(spec: GeneratorSpec, rng: np.random.Generator):
    X = rng.uniform(0.0, 1.0, (spec.n, spec.dimension))
    return X, friedman1_target(X) + spec.noise * rng.standard_normal(spec.n)


def _sparse_uncorrelated(spec: GeneratorSpec, rng: np.random.Generator):
    X = rng.standard_normal((spec.n, spec.dimension))
    return X, sparse_uncorrelated_target(X) + spec.noise * rng.standard_normal(spec.n)


def _moons(spec: GeneratorSpec, rng: np.random.Generator):
    n_outer = spec.n // 2
    n_inner = spec.n - n_outer
    t_outer = np.linspace(0, np.pi, n_outer)
    t_inner = np.linspace(0, np.pi, n_inner)
    X = np.vstack([
        np.column_stack([np.cos(t_outer), np.sin(t_outer)]),
        np.column_stack([1 - np.cos(t_inner), 1 - np.sin(t_inner) - 0.5]),
    ])
    y = np.concatenate([np.zeros(n_outer, dtype=np.int64), np.ones(n_inner, dtype=np.int64)])
    return X, y


def _circles(spec: GeneratorSpec, rng: np.random.Generator):
    n_outer = spec.n // 2
    n_inner = spec.n - n_outer
    t_outer = np.linspace(0, 2 * np.pi, n_outer, endpoint=False)
    t_inner = np.linspace(0, 2 * np.pi, n_inner, endpoint=False)
    X = np.vstack([
        np.column_stack([np.cos(t_outer), np.sin(t_outer)]),
        CIRCLES_FACTOR * np.column_stack([np.cos(t_inner), np.sin(t_inner)]),
    ])
    y = np.concatenate([np.zeros(n_outer, dtype=np.int64), np.ones(n_inner, dtype=np.int64)])
    return X, y


def _blobs(spec: GeneratorSpec, rng: np.random.Generator):
    n_first = spec.n // 2
    n_second = spec.n - n_first
    X = np.vstack([np.full((n_first, 2), -BLOB_CENTER), np.full((n_second, 2), BLOB_CENTER)])
    y = np.concatenate([np.zeros(n_first, dtype=np.int64), np.ones(n_second, dtype=np.int64)])
    return X, y


_GENERATORS = {
    GeneratorKind.LINEAR_GAUSSIAN: _linear_gaussian,
    GeneratorKind.FRIEDMAN1: _friedman1,
    GeneratorKind.SPARSE_UNCORRELATED: _sparse_uncorrelated,
    GeneratorKind.MOONS: _moons,
    GeneratorKind.CIRCLES: _circles,
    GeneratorKind.LINEARLY_SEPARABLE: _blobs,
}


def generate(spec: GeneratorSpec) -> Dataset:
    """Draw a seeded sample; same GeneratorSpec, same dataset.

    Classification sets get gaussian jitter of standard deviation `noise` on both
    coordinates and are shuffled, so classes are 50/50 up to rounding.
    """
    rng = np.random.default_rng(spec.seed)
    X, y = _GENERATORS[spec.kind](spec, rng)
    if spec.kind.is_classification:
        X = X + spec.noise * rng.standard_normal(X.shape)
        order = rng.permutation(spec.n)
        X, y = X[order], y[order]
    logger.debug(f"Generated {spec.kind.value}: n={spec.n}, d={X.shape[1]}, noise={spec.noise}")
    return Dataset(features=X, targets=y)


def _arc_distance(points: np.ndarray, center, low: float, high: float) -> np.ndarray:
    """Distance from each point to the unit-radius arc of angles [low, high] around center."""
    rel = points - np.asarray(center, dtype=float)
    radius = np.hypot(rel[:, 0], rel[:, 1])
    theta = np.arctan2(rel[:, 1], rel[:, 0])
    on_arc = (theta >= low) & (theta <= high)
    ends = [np.asarray(center) + np.array([np.cos(a), np.sin(a)]) for a in (low, high)]
    to_end = np.minimum(*(np.hypot(*(points - e).T) for e in ends))
    return np.where(on_arc, np.abs(radius - 1.0), to_end)


def reference_labels(kind: GeneratorKind, points) -> np.ndarray:
    """Noise-free class membership of arbitrary 2-d points for a classification generator."""
    kind = GeneratorKind(kind)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != 2:
        raise GenerationError(f"Reference labels are defined for 2-d points, got d={points.shape[1]}")
    if kind == GeneratorKind.MOONS:
        outer = _arc_distance(points, (0.0, 0.0), 0.0, np.pi)
        inner = _arc_distance(points, (1.0, 0.5), -np.pi, 0.0)
        return (inner < outer).astype(np.int64)
    if kind == GeneratorKind.CIRCLES:
        threshold = (1.0 + CIRCLES_FACTOR) / 2
        return (np.hypot(points[:, 0], points[:, 1]) < threshold).astype(np.int64)
    if kind == GeneratorKind.LINEARLY_SEPARABLE:
        return (points.sum(axis=1) > 0).astype(np.int64)
    raise GenerationError(f"{kind.value} is not a classification generator")


def load_csv(
    path: Union[str, Path],
    target_column: Union[str, int] = "y",
    has_header: bool = True,
    task: Literal["auto", "regression", "classification"] = "auto",
) -> Dataset:
    """Read a numeric CSV into a Dataset.

    Args:
        path: CSV file
        target_column: Column name, or position (negative counts from the end)
        has_header: Whether the first line names the columns
        task: Target type; "auto" reads integer-looking targets as class labels

    Returns:
        Dataset with the non-target columns, in file order, as features

    Raises:
        CsvParseError: A cell is empty, non-numeric, NaN or infinite
        SchemaError: The target column is missing or the file has no data
    """
    frame, numeric = _read_numeric(path, has_header)
    target = _resolve_column(frame, target_column, has_header)

    features = numeric.drop(columns=[target]).to_numpy(dtype=float)
    if features.shape[1] == 0:
        raise SchemaError(f"{path} has no feature columns")
    targets = numeric[target].to_numpy(dtype=float)
    if task == "classification" or (
        task == "auto" and frame[target].str.strip().str.fullmatch(r"[+-]?\d+").all()
    ):
        if not np.all(targets == np.round(targets)):
            raise SchemaError(f"Column '{target}' does not hold integer class labels")
        targets = targets.astype(np.int64)
    logger.info(f"Loaded {path}: n={features.shape[0]}, d={features.shape[1]}, target '{target}'")
    return Dataset(features=features, targets=targets)


def _read_numeric(path: Union[str, Path], has_header: bool) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """Raw string cells and their parsed values; every cell must be a finite number."""
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, header=0 if has_header else None)
    except pd.errors.EmptyDataError as e:
        raise SchemaError(f"{path} contains no data") from e
    frame.columns = [str(c) for c in frame.columns]
    if frame.empty:
        raise SchemaError(f"{path} contains no data rows")
    numeric = frame.apply(lambda column: pd.to_numeric(column.str.strip(), errors="coerce"))
    bad = ~np.isfinite(numeric.to_numpy(dtype=float))
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise CsvParseError(int(row) + 1, frame.columns[col], frame.iat[row, col])
    return frame, numeric


def load_features(path: Union[str, Path], has_header: bool = True) -> np.ndarray:
    """Feature rows of a CSV of query points; a `y` column, if present, is ignored."""
    _, numeric = _read_numeric(path, has_header)
    if has_header and "y" in numeric.columns:
        numeric = numeric.drop(columns=["y"])
    return numeric.to_numpy(dtype=float)


def _resolve_column(frame: pd.DataFrame, column: Union[str, int], has_header: bool) -> str:
    columns = list(frame.columns)
    if isinstance(column, int) or (not has_header and str(column).lstrip("-").isdigit()):
        position = int(column)
        if not -len(columns) <= position < len(columns):
            raise SchemaError(f"Target column index {position} out of range for {len(columns)} columns")
        return columns[position]
    if column not in columns:
        raise SchemaError(f"Target column '{column}' not found; columns are {columns}")
    return column


def write_csv(data: Dataset, path: Union[str, Path]) -> Path:
    """Write `x1..xd[,y]` with a header row; floats are written round-trip exact."""
    path = Path(path)
    frame = pd.DataFrame(data.features, columns=[f"x{j + 1}" for j in range(data.d)])
    if data.targets is not None:
        frame["y"] = data.targets
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, encoding="utf-8")
    logger.info(f"Wrote {data.n} rows to {path}")
    return path
