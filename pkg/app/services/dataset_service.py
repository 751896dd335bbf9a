"""
Data splitting and the cached prediction matrix on the retained half.
"""
import logging
import math
from typing import Optional, Sequence

import numpy as np

from app.core.errors import EmptyEnsembleError, InvalidSplitError, MachineOutputError
from app.schemas.dataset import Dataset, PredictionMatrix, SplitPair
from app.services.machine_service import TrainedMachine

logger = logging.getLogger(__name__)


def default_split_size(n: int) -> int:
    """Size of D_k when the caller gives none: ceil(n / 2)."""
    return math.ceil(n / 2)


def split_dataset(data: Dataset, k: Optional[int] = None, seed: int = 0,
                  shuffle: bool = True) -> SplitPair:
    """Split D_n into D_k (first k shuffled rows) and D_l (the remaining n - k rows).

    Args:
        data: Source dataset, with targets
        k: Size of the first half; defaults to ceil(n / 2)
        seed: Seed of the row shuffle
        shuffle: Keep the file order when False

    Returns:
        The two halves
    """
    if data.targets is None:
        raise ValueError("Splitting requires a dataset with targets")
    if k is None:
        k = default_split_size(data.n)
    if k <= 0 or k >= data.n:
        raise InvalidSplitError(f"Split size k={k} must satisfy 1 <= k <= n - 1 = {data.n - 1}")

    order = np.random.default_rng(seed).permutation(data.n) if shuffle else np.arange(data.n)
    split = SplitPair(train_half=data.take(order[:k]), retained_half=data.take(order[k:]))
    logger.debug(f"Split {data.n} rows into k={split.k}, ell={split.ell} (seed={seed})")
    return split


def build_prediction_matrix(machines: Sequence[TrainedMachine], points: Dataset) -> PredictionMatrix:
    """Evaluate every machine on every point: entry (m, i) = r_{k,m}(X_i)."""
    if not machines:
        raise EmptyEnsembleError("At least one machine is required")
    rows = []
    for machine in machines:
        predictions = machine.predict_batch(points.features)
        if not np.all(np.isfinite(predictions)):
            raise MachineOutputError(machine.name)
        rows.append(predictions.astype(float))
    logger.debug(f"Built a {len(rows)}x{points.n} prediction matrix")
    return PredictionMatrix(values=np.vstack(rows), machine_names=[m.name for m in machines])


def derive_seed(seed: int, *keys: int) -> int:
    """Independent child seed for (seed, keys...), stable across platforms."""
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])
