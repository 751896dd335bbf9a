"""
Tests for datasets, splits and the prediction matrix.
"""
import numpy as np
import pytest

from app.core.errors import EmptyEnsembleError, InvalidSplitError, MachineOutputError
from app.schemas.dataset import Dataset, PredictionMatrix
from app.services.dataset_service import (
    build_prediction_matrix,
    default_split_size,
    derive_seed,
    split_dataset,
)
from app.services.machine_service import load_machine, machine_predict


def _toy(n=10, d=2):
    X = np.arange(n * d, dtype=float).reshape(n, d)
    return Dataset(features=X, targets=np.arange(n, dtype=float))


class TestDataset:
    """Test cases for the Dataset container."""

    def test_shapes(self):
        """n and d come from the feature matrix."""
        data = _toy(7, 3)
        assert (data.n, data.d) == (7, 3)
        assert data.has_targets
        assert not data.is_labelled

    def test_integer_targets_are_labels(self):
        """Integer targets are treated as class labels."""
        data = Dataset(features=[[0.0], [1.0]], targets=[0, 1])
        assert data.is_labelled

    def test_one_dimensional_features_become_a_column(self):
        """A 1-d feature array is read as n rows of one feature."""
        data = Dataset(features=[1.0, 2.0, 3.0])
        assert (data.n, data.d) == (3, 1)

    def test_rejects_non_finite_features(self):
        """NaN features are refused."""
        with pytest.raises(ValueError):
            Dataset(features=[[1.0], [np.nan]])

    def test_rejects_target_length_mismatch(self):
        """Targets must have one entry per row."""
        with pytest.raises(ValueError):
            Dataset(features=[[1.0], [2.0]], targets=[1.0])

    def test_does_not_freeze_caller_arrays(self):
        """The caller's array stays writable."""
        X = np.zeros((3, 2))
        Dataset(features=X)
        X[0, 0] = 1.0
        assert X[0, 0] == 1.0

    def test_take_keeps_source_index(self):
        """Subsets remember the rows they came from."""
        data = _toy()
        subset = data.take([7, 2])
        assert subset.index.tolist() == [7, 2]
        assert subset.targets.tolist() == [7.0, 2.0]
        assert subset.take([1]).index.tolist() == [2]


class TestSplitDataset:
    """Test cases for split_dataset."""

    def test_sizes(self):
        """n=10, k=5 gives halves of 5 and 5."""
        split = split_dataset(_toy(10), k=5, seed=0)
        assert (split.k, split.ell) == (5, 5)

    def test_default_size_is_ceil_half(self):
        """Without k, D_k has ceil(n / 2) rows."""
        assert default_split_size(11) == 6
        assert split_dataset(_toy(11), seed=0).k == 6

    @pytest.mark.parametrize("k", [0, 10, 11, -1])
    def test_invalid_k(self, k):
        """k must leave both halves nonempty."""
        with pytest.raises(InvalidSplitError):
            split_dataset(_toy(10), k=k, seed=0)

    def test_deterministic(self):
        """Same seed, same split."""
        first = split_dataset(_toy(), k=4, seed=3)
        second = split_dataset(_toy(), k=4, seed=3)
        assert np.array_equal(first.train_half.index, second.train_half.index)
        assert np.array_equal(first.retained_half.features, second.retained_half.features)

    def test_halves_partition_the_rows(self):
        """The halves are disjoint and cover every row."""
        split = split_dataset(_toy(), k=4, seed=9)
        rows = np.concatenate([split.train_half.index, split.retained_half.index])
        assert sorted(rows.tolist()) == list(range(10))

    def test_unshuffled_split_keeps_order(self):
        """shuffle=False takes the first k rows."""
        split = split_dataset(_toy(), k=3, shuffle=False)
        assert split.train_half.index.tolist() == [0, 1, 2]

    def test_requires_targets(self):
        """Splitting needs targets."""
        with pytest.raises(ValueError):
            split_dataset(Dataset(features=np.zeros((4, 1))), k=2)


class TestPredictionMatrix:
    """Test cases for build_prediction_matrix."""

    def test_constant_machine(self):
        """A constant machine fills its row with the constant."""
        machine = load_machine("three", lambda X: np.full(X.shape[0], 3.0), n_features=2)
        matrix = build_prediction_matrix([machine], _toy(4))
        assert matrix.values.tolist() == [[3.0, 3.0, 3.0, 3.0]]

    def test_empty_roster(self):
        """No machines, no matrix."""
        with pytest.raises(EmptyEnsembleError):
            build_prediction_matrix([], _toy(4))

    def test_matches_pointwise_predictions(self):
        """Entries equal per-point machine_predict calls."""
        machines = [
            load_machine("sum", lambda X: X.sum(axis=1), n_features=2),
            load_machine("first", lambda X: X[:, 0] ** 2, n_features=2),
        ]
        points = _toy(3)
        matrix = build_prediction_matrix(machines, points)
        assert matrix.values.shape == (2, 3)
        for m, machine in enumerate(machines):
            for i in range(3):
                assert matrix.values[m, i] == machine_predict(machine, points.row(i))
        assert matrix.machine_names == ["sum", "first"]

    def test_non_finite_output_names_machine(self):
        """A NaN prediction raises an error naming the machine."""
        broken = load_machine("broken", lambda X: np.full(X.shape[0], np.nan), n_features=2)
        with pytest.raises(MachineOutputError) as info:
            build_prediction_matrix([broken], _toy(3))
        assert info.value.machine_name == "broken"

    def test_value_range(self):
        """value_range is max - min over all entries."""
        matrix = PredictionMatrix(values=[[1.0, 4.0], [-2.0, 0.5]])
        assert matrix.value_range() == 6.0
        assert (matrix.n_machines, matrix.ell) == (2, 2)


class TestDeriveSeed:
    """Test cases for derive_seed."""

    def test_stable_and_distinct(self):
        """Child seeds are reproducible and differ across keys."""
        assert derive_seed(42, 0) == derive_seed(42, 0)
        assert derive_seed(42, 0) != derive_seed(42, 1)
