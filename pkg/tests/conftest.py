"""
Shared fixtures.
"""
import numpy as np
import pytest

from app.schemas.datagen import GeneratorKind, GeneratorSpec
from app.schemas.machine import MachineKind, MachineSpec
from app.services.datagen_service import generate


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def friedman_data():
    """Seeded Friedman #1 sample, n=200, d=6."""
    return generate(GeneratorSpec(kind=GeneratorKind.FRIEDMAN1, n=200, d=6, noise=1.0, seed=0))


@pytest.fixture
def linear_data():
    """Noise-free linear-gaussian sample."""
    return generate(GeneratorSpec(kind=GeneratorKind.LINEAR_GAUSSIAN, n=120, d=4, noise=0.0, seed=1))


@pytest.fixture
def moons_data():
    return generate(GeneratorSpec(kind=GeneratorKind.MOONS, n=400, noise=0.2, seed=3))


@pytest.fixture
def fast_regression_roster():
    """Cheap machines: small forest, shallow tree."""
    return [
        MachineSpec(kind=MachineKind.RIDGE, hyperparameters={"regularization": 0.1}),
        MachineSpec(kind=MachineKind.KNN, hyperparameters={"n_neighbors": 5}),
        MachineSpec(kind=MachineKind.DECISION_TREE, hyperparameters={"max_depth": 6}),
        MachineSpec(kind=MachineKind.RANDOM_FOREST, hyperparameters={"n_trees": 10, "max_depth": 6}, seed=7),
    ]


@pytest.fixture
def fast_classification_roster():
    return [
        MachineSpec(kind=MachineKind.KNN_CLASSIFIER, hyperparameters={"n_neighbors": 7}),
        MachineSpec(kind=MachineKind.DECISION_TREE_CLASSIFIER, hyperparameters={"max_depth": 6}),
        MachineSpec(kind=MachineKind.LOGISTIC_REGRESSION),
        MachineSpec(kind=MachineKind.NAIVE_BAYES),
    ]
