import pytest
from unittest.mock import patch
from fastapi.testclient import TestClient

from rank_anneal.annealer import AnnealerConfig, anneal
from rank_anneal.experiment import ResultStore
from rank_anneal.main import get_evaluator, router


@pytest.fixture
def service_config(mock_config_manager):
    """Service wired to a temporary store and no data directory."""
    get_evaluator.cache_clear()
    with patch("rank_anneal.main.config_manager", mock_config_manager):
        yield mock_config_manager
    get_evaluator.cache_clear()


@pytest.fixture
def stored_runs(service_config, two_basin_evaluator):
    store = ResultStore(service_config.store_dir)
    for seed in range(3):
        store.save(f"abc-def-k4-r{seed}", anneal(4, two_basin_evaluator, AnnealerConfig(budget=10, seed=seed)))
    store.save("abc-def-k3-r0", anneal(3, two_basin_evaluator, AnnealerConfig(budget=10)))
    return store


class TestRunsEndpoint:
    """Test cases for the run listing endpoints."""

    def setup_method(self):
        """Set up test client."""
        self.client = TestClient(router)

    def test_list_runs(self, stored_runs):
        response = self.client.get("/runs", params={"page": 1})
        assert response.status_code == 200
        body = response.json()
        assert body["totalDocs"] == 4
        assert body["pageSize"] == 20
        assert [item["key"] for item in body["results"]] == [
            "abc-def-k3-r0",
            "abc-def-k4-r0",
            "abc-def-k4-r1",
            "abc-def-k4-r2",
        ]
        assert "bestSubsetHex" in body["results"][0]

    def test_filter_by_k(self, stored_runs):
        body = self.client.get("/runs", params={"k": 4}).json()
        assert body["page"] is None
        assert body["totalDocs"] == 3

    def test_filter_by_algorithm(self, stored_runs):
        body = self.client.get("/runs", params={"algorithm": "lbs"}).json()
        assert body["results"] == []

    def test_empty_store(self, service_config):
        body = self.client.get("/runs").json()
        assert body["results"] == []

    def test_one_run(self, stored_runs):
        response = self.client.get("/runs/abc-def-k3-r0")
        assert response.status_code == 200
        body = response.json()
        assert body["key"] == "abc-def-k3-r0"
        assert body["k"] == 3
        assert len(body["trace"]) == 10
        assert body["bestGuideScore"] == stored_runs.load("abc-def-k3-r0").best_guide_score
        assert {"initialGuideScore", "evaluationsUsed", "bestTestReport", "wallMs"} <= set(body)
        assert "best_subset_hex" not in body

    def test_missing_run(self, stored_runs):
        assert self.client.get("/runs/abc-def-k9-r0").status_code == 404

    def test_invalid_key(self, stored_runs):
        assert self.client.get("/runs/.hidden").status_code == 400


class TestEvaluateEndpoint:
    """Test cases for scoring a subset over HTTP."""

    def setup_method(self):
        """Set up test client."""
        self.client = TestClient(router)

    def test_without_data_dir(self, service_config):
        response = self.client.post("/evaluate", json={"subset_hex": "3"})
        assert response.status_code == 400

    def test_synthetic_fold(self, service_config, synthetic_fold):
        service_config.data_dir = str(synthetic_fold)
        response = self.client.post("/evaluate", json={"subset_hex": "30", "ranker": "synthetic"})
        assert response.status_code == 200
        body = response.json()
        assert body["subsetHex"] == "30"
        assert 0.0 < body["guideScore"] <= 1.0
        assert set(body["testReport"]) == {"ndcg@10", "map"}

    def test_coordinate_ascent_fold(self, service_config, synthetic_fold):
        service_config.data_dir = str(synthetic_fold)
        response = self.client.post("/evaluate", json={"subset_hex": "30"})
        assert response.status_code == 200
        assert 0.0 <= response.json()["testScore"] <= 1.0

    def test_bad_subset(self, service_config, synthetic_fold):
        service_config.data_dir = str(synthetic_fold)
        response = self.client.post("/evaluate", json={"subset_hex": "zz", "ranker": "synthetic"})
        assert response.status_code == 400

    def test_empty_subset(self, service_config, synthetic_fold):
        service_config.data_dir = str(synthetic_fold)
        response = self.client.post("/evaluate", json={"subset_hex": "00", "ranker": "synthetic"})
        assert response.status_code == 422

    def test_bad_metric(self, service_config, synthetic_fold):
        service_config.data_dir = str(synthetic_fold)
        response = self.client.post("/evaluate", json={"subset_hex": "30", "guide_metric": "mrr"})
        assert response.status_code == 400

    def test_missing_fold_files(self, service_config, tmp_path):
        service_config.data_dir = str(tmp_path)
        response = self.client.post("/evaluate", json={"subset_hex": "30"})
        assert response.status_code == 422
