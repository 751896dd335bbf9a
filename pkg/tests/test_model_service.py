"""
Tests for model persistence and the model service.
"""
import json
from unittest.mock import patch

import numpy as np
import pytest

from app.core.errors import ConfigError, ShapeError
from app.schemas.aggregation import AggregatorConfig, EstimatorKind
from app.services import model_service
from app.services.aggregation_service import CobraAggregator
from app.services.model_service import (
    METADATA_FILE,
    ModelService,
    get_model_service,
    load_model,
    save_model,
)


@pytest.fixture
def fitted(friedman_data, fast_regression_roster):
    return CobraAggregator.fit(EstimatorKind.KERNELCOBRA, AggregatorConfig(lambda_=0.5), friedman_data,
                               fast_regression_roster, seed=1)


class TestPersistence:
    """Test cases for save_model and load_model."""

    def test_round_trip(self, tmp_path, fitted, friedman_data):
        """A loaded model predicts exactly like the saved one."""
        save_model(fitted, tmp_path / "model")
        loaded = load_model(tmp_path / "model")
        np.testing.assert_array_equal(loaded.predict_batch(friedman_data.features[:20]),
                                      fitted.predict_batch(friedman_data.features[:20]))
        metadata = json.loads((tmp_path / "model" / METADATA_FILE).read_text(encoding="utf-8"))
        assert metadata["estimator"] == "kernelcobra"
        assert metadata["config"]["lambda"] == 0.5
        assert metadata["ell"] == 100
        assert metadata["machines"] == ["ridge", "knn", "decision-tree", "random-forest"]

    def test_missing_model(self, tmp_path):
        """An empty directory holds no model."""
        with pytest.raises(ConfigError):
            load_model(tmp_path)

    def test_foreign_file(self, tmp_path):
        """A joblib file that is not an aggregate is refused."""
        import joblib
        joblib.dump({"not": "a model"}, tmp_path / model_service.MODEL_FILE)
        with pytest.raises(ConfigError):
            load_model(tmp_path)


class TestModelService:
    """Test cases for the ModelService class."""

    async def test_create_without_model_dir(self):
        """Without MODEL_DIR the service starts but is not ready."""
        with patch("app.services.model_service.settings") as mock_settings:
            mock_settings.MODEL_DIR = None
            service = await ModelService.create()
        assert not service.is_ready
        with pytest.raises(RuntimeError):
            service.predict([[0.0] * 6])

    async def test_create_with_broken_dir(self, tmp_path):
        """A bad model directory is logged, not raised."""
        service = await ModelService.create(str(tmp_path))
        assert not service.is_ready

    async def test_create_loads_model(self, tmp_path, fitted, friedman_data):
        """A saved model is loaded and served."""
        save_model(fitted, tmp_path)
        service = await ModelService.create(str(tmp_path))
        assert service.is_ready
        assert service.metadata["n_features"] == 6
        rows = friedman_data.features[:3].tolist()
        assert service.predict(rows) == pytest.approx(fitted.predict_batch(friedman_data.features[:3]).tolist())
        weights = service.weights(rows[0])
        assert len(weights) == 100
        assert sum(weights) == pytest.approx(1.0)
        with pytest.raises(ShapeError):
            service.weights([0.0, 1.0])

    async def test_singleton(self):
        """get_model_service returns one shared instance."""
        with patch.object(model_service, "_model_service", None), \
                patch("app.services.model_service.settings") as mock_settings:
            mock_settings.MODEL_DIR = None
            first = await get_model_service()
            second = await get_model_service()
            assert first is second
