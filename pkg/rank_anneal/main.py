import functools
import logging
from typing import Dict, Literal, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from rank_anneal.config import ConfigManager, build_model
from rank_anneal.errors import ConfigError, DataError, EvaluationError
from rank_anneal.evaluator import EvaluatorConfig, EvaluatorFactory, ScoreCard, SubsetEvaluator
from rank_anneal.experiment import ResultStore, open_evaluator
from rank_anneal.records import RunRecord
from rank_anneal.subset import FeatureSubset
from rank_anneal.tools import CamelModel, create_paginate_response

logger = logging.getLogger(__name__)

config_manager = ConfigManager()

router = FastAPI(title="rank-anneal results")


class EvaluateRequest(BaseModel):
    subset_hex: str
    guide_metric: str = "ndcg@10"
    guide_split: Literal["validation", "test"] = "validation"
    ranker: Literal["coordinate_ascent", "synthetic"] = "coordinate_ascent"
    seed: int = 0


class RunSummary(CamelModel):
    key: str
    algorithm: str
    k: int
    seed: int
    best_subset_hex: str
    best_guide_score: float
    best_test_score: float
    evaluations_used: int
    wall_ms: float

    @classmethod
    def from_record(cls, key: str, record: RunRecord) -> "RunSummary":
        return cls(key=key, **record.model_dump(include=set(cls.model_fields) - {"key"}))


class RunDetail(RunRecord):
    """A stored run with its store key, trace included."""

    model_config = CamelModel.model_config

    key: str


class SubsetScore(CamelModel):
    subset_hex: str
    guide_score: float
    test_score: float
    test_report: Dict[str, float]

    @classmethod
    def from_card(cls, subset: FeatureSubset, card: ScoreCard) -> "SubsetScore":
        return cls(
            subset_hex=subset.to_hex(),
            guide_score=card.guide_score,
            test_score=card.test_score,
            test_report=card.test_report,
        )


def get_store() -> ResultStore:
    return ResultStore(config_manager.store_dir)


@functools.lru_cache(maxsize=8)
def get_evaluator(data_dir: str, config: EvaluatorConfig) -> SubsetEvaluator:
    """Evaluator per (fold, config); data loads once per process."""
    evaluator, _ = open_evaluator(data_dir, config, EvaluatorFactory.create_cache(config_manager))
    return evaluator


@router.get("/runs")
async def all_runs(
    page: Optional[int] = None,
    algorithm: Optional[str] = None,
    k: Optional[int] = None,
):
    """
    Retrieve paginated run records with optional filtering.

    Args:
        page: Page number for pagination
        algorithm: Filter by algorithm (sa, hc or lbs)
        k: Filter by subset size

    Returns:
        Paginated response containing run summaries
    """
    try:
        records = get_store().records(algorithm=algorithm, k=k)
    except DataError as e:
        raise HTTPException(detail=str(e), status_code=422)
    return create_paginate_response(page, [RunSummary.from_record(key, record) for key, record in records])


@router.get("/runs/{key}")
async def one_run(key: str):
    """Retrieve one run record, trace included."""
    try:
        record = get_store().load(key)
    except DataError as e:
        raise HTTPException(detail=str(e), status_code=400)
    if record is None:
        raise HTTPException(detail="Run not found", status_code=404)
    return RunDetail(key=key, **dict(record)).model_dump(mode="json", by_alias=True)


@router.post("/evaluate")
async def evaluate_subset(request: EvaluateRequest):
    """
    Score one hex-encoded feature subset on the configured fold.

    Raises:
        HTTPException: 400 for a bad subset or config, 422 when the data cannot be scored
    """
    if not config_manager.data_dir:
        raise HTTPException(detail="RANK_ANNEAL_DATA_DIR is not set", status_code=400)
    try:
        config = build_model(EvaluatorConfig, request.model_dump(exclude={"subset_hex"}))
        evaluator = get_evaluator(config_manager.data_dir, config)
        subset = FeatureSubset.from_hex(request.subset_hex, evaluator.n_features)
        card = evaluator.evaluate(subset)
    except ConfigError as e:
        raise HTTPException(detail=str(e), status_code=400)
    except (DataError, EvaluationError) as e:
        raise HTTPException(detail=str(e), status_code=422)

    logger.info("evaluated subset=%s guide=%.6f", subset.to_hex(), card.guide_score)
    return SubsetScore.from_card(subset, card).to_response()
