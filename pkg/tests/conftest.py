import logging

import pytest
from unittest.mock import MagicMock

from rank_anneal.config import ConfigManager
from rank_anneal.evaluator import EvaluatorConfig, ScoreCache, SyntheticEvaluator
from rank_anneal.letor import parse_letor
from rank_anneal.synthetic import SyntheticLandscape, make_synthetic, two_basin_landscape, write_synthetic

ENV_VARS = (
    "RANK_ANNEAL_LOG_LEVEL",
    "RANK_ANNEAL_WORKERS",
    "RANK_ANNEAL_STORE_DIR",
    "RANK_ANNEAL_CACHE_FILE",
    "RANK_ANNEAL_DATA_DIR",
    "RANK_ANNEAL_CACHE_SIZE",
)

SAMPLE_LETOR = (
    "2 qid:10 1:0.5 2:0.1 3:1.0 # doc-a\n"
    "0 qid:10 2:0.25\n"
    "1 qid:11 1:0.1 2:0.2 3:0.3 # doc-c\n"
    "1 qid:10 1:0.9 3:0.5\n"
)


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    """Keep the host's RANK_ANNEAL_* settings out of every test."""
    for name in ENV_VARS:
        monkeypatch.delenv(name, raising=False)


@pytest.fixture
def mock_config_manager(tmp_path):
    """Mock configuration manager for testing."""
    config = MagicMock(spec=ConfigManager)
    config.log_level = "INFO"
    config.workers = 1
    config.store_dir = str(tmp_path / "runs")
    config.cache_file = None
    config.data_dir = None
    config.cache_size = None
    return config


@pytest.fixture
def sample_letor_text():
    """Four documents over two queries, qid 10 split across non-adjacent lines."""
    return SAMPLE_LETOR


@pytest.fixture
def sample_dataset(sample_letor_text):
    return parse_letor(sample_letor_text)


@pytest.fixture
def two_basin():
    """n=12 landscape: optimum {0,1,2,3} scores 12/22, decoy {4..7} scores 8/22."""
    return two_basin_landscape()


@pytest.fixture
def synthetic_config():
    return EvaluatorConfig(ranker="synthetic")


@pytest.fixture
def two_basin_evaluator(two_basin, synthetic_config):
    return SyntheticEvaluator(two_basin, synthetic_config, ScoreCache())


@pytest.fixture
def flat_landscape():
    """Every feature equally useful, no redundancy: every k-subset scores k/n."""
    return SyntheticLandscape(utilities=(1.0,) * 8)


@pytest.fixture
def synthetic_splits():
    """Small generated corpus: n=6, 20 queries, planted features 0 and 1."""
    return make_synthetic(6, 20, seed=3)


@pytest.fixture
def synthetic_fold(tmp_path, synthetic_splits):
    """The synthetic corpus written as a LETOR fold directory with landscape.json."""
    train, validation, test, landscape = synthetic_splits
    return write_synthetic(tmp_path / "fold", (train, validation, test), landscape)


@pytest.fixture
def restore_logging():
    """configure_logging replaces root handlers; put pytest's back afterwards."""
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield root
    for handler in list(root.handlers):
        root.removeHandler(handler)
    for handler in handlers:
        root.addHandler(handler)
    root.setLevel(level)
