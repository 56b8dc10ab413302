"""Subset evaluation: train a ranker on the selected features and score it.

Every evaluator memoizes through a shared ``ScoreCache`` keyed by the
evaluator digest (config plus data), the feature count and the subset's
hex pattern, so concurrent runs over the same data reuse each other's work.
"""

import hashlib
import json
import logging
import threading
import time
from abc import ABC, abstractmethod
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator

from rank_anneal.config import ConfigManager
from rank_anneal.errors import ConfigError, DataError, EvaluationError
from rank_anneal.letor import RankingDataset, digest_datasets
from rank_anneal.metrics import MetricSpec, QueryBatchScorer
from rank_anneal.ranker import CoordinateAscentRanker, MinMaxNormalizer
from rank_anneal.subset import FeatureSubset
from rank_anneal.synthetic import LANDSCAPE_FILE, SyntheticLandscape, synthetic_objective

logger = logging.getLogger(__name__)

CACHE_FORMAT = "rank-anneal-cache"
CACHE_VERSION = 1
REPORT_METRICS = ("ndcg@10", "map")

CacheKey = Tuple[str, int, str]


class EvaluatorConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    guide_metric: str = "ndcg@10"
    guide_split: Literal["validation", "test"] = "validation"
    seed: int = Field(default=0, ge=0, lt=2**64)
    ranker: Literal["coordinate_ascent", "synthetic"] = "coordinate_ascent"
    skip_empty_queries: bool = False
    ca_passes: int = Field(default=3, ge=1)
    ca_steps: int = Field(default=8, ge=1)

    @field_validator("guide_metric")
    @classmethod
    def _check_metric(cls, value: str) -> str:
        try:
            return MetricSpec.parse(value).name
        except ConfigError as e:
            raise ValueError(str(e))

    def metric(self, name: Optional[str] = None) -> MetricSpec:
        return MetricSpec.parse(name or self.guide_metric, skip_empty=self.skip_empty_queries)

    def digest(self) -> str:
        return hashlib.sha256(self.model_dump_json().encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ScoreCard:
    """Outcome of one evaluation. ``train_ms`` is informational and ignored by equality."""

    guide_score: float
    test_score: float
    test_report: Dict[str, float]
    per_query: Optional[Tuple[float, ...]] = None
    train_ms: float = field(default=0.0, compare=False)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "guide_score": self.guide_score,
            "test_score": self.test_score,
            "test_report": dict(self.test_report),
            "per_query": list(self.per_query) if self.per_query is not None else None,
            "train_ms": self.train_ms,
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "ScoreCard":
        per_query = payload.get("per_query")
        return cls(
            guide_score=float(payload["guide_score"]),
            test_score=float(payload["test_score"]),
            test_report={str(k): float(v) for k, v in payload["test_report"].items()},
            per_query=tuple(float(v) for v in per_query) if per_query is not None else None,
            train_ms=float(payload.get("train_ms", 0.0)),
        )


class ScoreCache:
    """Thread-safe LRU map from cache key to ScoreCard; unbounded unless ``max_entries`` is set."""

    def __init__(self, max_entries: Optional[int] = None):
        if max_entries is not None and max_entries < 1:
            raise ConfigError(f"cache entry cap must be positive, got {max_entries}")
        self.max_entries = max_entries
        self._entries: "OrderedDict[CacheKey, ScoreCard]" = OrderedDict()
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    def __contains__(self, key: CacheKey) -> bool:
        with self._lock:
            return key in self._entries

    def get(self, key: CacheKey) -> Optional[ScoreCard]:
        with self._lock:
            card = self._entries.get(key)
            if card is None:
                self.misses += 1
                return None
            self._entries.move_to_end(key)
            self.hits += 1
            return card

    def put(self, key: CacheKey, card: ScoreCard) -> ScoreCard:
        """Store ``card`` unless the key is already present; returns the stored card."""
        with self._lock:
            existing = self._entries.get(key)
            if existing is not None:
                self._entries.move_to_end(key)
                return existing
            self._entries[key] = card
            if self.max_entries is not None:
                while len(self._entries) > self.max_entries:
                    self._entries.popitem(last=False)
            return card

    def save(self, path: Union[str, Path]) -> None:
        with self._lock:
            entries = [
                {"evaluator": digest, "n": n, "subset": hex_bits, "card": card.to_dict()}
                for (digest, n, hex_bits), card in self._entries.items()
            ]
        payload = {"format": CACHE_FORMAT, "version": CACHE_VERSION, "entries": entries}
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text(json.dumps(payload), encoding="utf-8")
        tmp.replace(path)
        logger.info("saved score cache entries=%d path=%s", len(entries), path)

    @classmethod
    def load(cls, path: Union[str, Path], max_entries: Optional[int] = None) -> "ScoreCache":
        """Read a cache file written by ``save``.

        Raises:
            DataError: unreadable file, wrong format header or unknown version
        """
        path = Path(path)
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise DataError(f"cannot read score cache {path}: {e}") from e
        if not isinstance(payload, dict) or payload.get("format") != CACHE_FORMAT:
            raise DataError(f"{path} is not a rank-anneal score cache")
        if payload.get("version") != CACHE_VERSION:
            raise DataError(f"unsupported score cache version {payload.get('version')!r} in {path}")

        cache = cls(max_entries=max_entries)
        for entry in payload.get("entries", []):
            key = (str(entry["evaluator"]), int(entry["n"]), str(entry["subset"]))
            cache.put(key, ScoreCard.from_dict(entry["card"]))
        logger.info("loaded score cache entries=%d path=%s", len(cache), path)
        return cache


class SubsetEvaluator(ABC):
    """Maps a FeatureSubset to a ScoreCard, memoized through a ScoreCache."""

    def __init__(self, n_features: int, cache: Optional[ScoreCache] = None):
        self.n_features = n_features
        self.cache = cache if cache is not None else ScoreCache()
        self._counter_lock = threading.Lock()
        self.calls = 0
        self.computed = 0

    @property
    @abstractmethod
    def digest(self) -> str:
        """Identity of the evaluator's config and data, used in cache keys."""

    @abstractmethod
    def _compute(self, subset: FeatureSubset) -> ScoreCard:
        """Score ``subset`` without consulting the cache."""

    def evaluate(self, subset: FeatureSubset) -> ScoreCard:
        """Score ``subset``, serving repeated requests from the cache.

        Raises:
            EvaluationError: empty subset or subset length differing from the data
        """
        if subset.n != self.n_features:
            raise EvaluationError(f"subset over {subset.n} features, data has {self.n_features}")
        if subset.k == 0:
            raise EvaluationError("cannot evaluate an empty feature subset")
        with self._counter_lock:
            self.calls += 1

        key = (self.digest, subset.n, subset.to_hex())
        card = self.cache.get(key)
        if card is not None:
            logger.debug("cache hit subset=%s", key[2])
            return card

        card = self._compute(subset)
        with self._counter_lock:
            self.computed += 1
        logger.debug("evaluated subset=%s guide=%.6f train_ms=%.1f", key[2], card.guide_score, card.train_ms)
        return self.cache.put(key, card)

    def score(self, subset: FeatureSubset) -> float:
        return self.evaluate(subset).guide_score


class RankerEvaluator(SubsetEvaluator):
    """Trains a coordinate-ascent linear ranker on the selected features of the train split."""

    def __init__(
        self,
        train: RankingDataset,
        validation: RankingDataset,
        test: RankingDataset,
        config: EvaluatorConfig,
        cache: Optional[ScoreCache] = None,
        data_digest: Optional[str] = None,
    ):
        dims = {split.split: split.n_features for split in (train, validation, test)}
        if len(set(dims.values())) != 1:
            raise DataError(f"feature dimensionality differs across splits: {dims}")
        for split in (train, validation, test):
            if split.n_queries == 0:
                raise DataError(f"the {split.split} split has no queries")
        super().__init__(train.n_features, cache)

        self.config = config
        self._metric = config.metric()
        self._train = train.matrix()
        guide = validation if config.guide_split == "validation" else test
        self._guide = guide.matrix()
        self._test = test.matrix()
        self._normalizer = MinMaxNormalizer.fit(self._train.features)
        self._guide_scorer = QueryBatchScorer(self._guide, self._metric)
        self._test_scorer = QueryBatchScorer(self._test, self._metric)
        self._report_scorers = {
            name: QueryBatchScorer(self._test, config.metric(name)) for name in REPORT_METRICS
        }
        data_digest = data_digest or digest_datasets(train, validation, test)
        self._digest = hashlib.sha256(f"{config.digest()}:{data_digest}".encode("utf-8")).hexdigest()

    @property
    def digest(self) -> str:
        return self._digest

    def _compute(self, subset: FeatureSubset) -> ScoreCard:
        active = subset.indices()
        started = time.perf_counter()
        ranker = CoordinateAscentRanker(
            self._metric, passes=self.config.ca_passes, n_steps=self.config.ca_steps, seed=self.config.seed
        )
        weights = ranker.fit(self._train, active, self._normalizer)
        train_ms = (time.perf_counter() - started) * 1000.0

        guide_scores = ranker.predict(self._guide, active, weights, self._normalizer)
        test_scores = ranker.predict(self._test, active, weights, self._normalizer)
        per_query = self._test_scorer.per_query(test_scores)[0]
        return ScoreCard(
            guide_score=float(self._guide_scorer.score(guide_scores)[0]),
            test_score=float(self._test_scorer.score(test_scores)[0]),
            test_report={name: float(scorer.score(test_scores)[0]) for name, scorer in self._report_scorers.items()},
            per_query=tuple(float(value) for value in per_query),
            train_ms=train_ms,
        )


class SyntheticEvaluator(SubsetEvaluator):
    """Closed-form landscape objective; guide, test and report scores coincide."""

    def __init__(self, landscape: SyntheticLandscape, config: EvaluatorConfig, cache: Optional[ScoreCache] = None):
        super().__init__(landscape.n, cache)
        self.config = config
        self.landscape = landscape
        self._digest = hashlib.sha256(f"{config.digest()}:{landscape.digest()}".encode("utf-8")).hexdigest()

    @property
    def digest(self) -> str:
        return self._digest

    def _compute(self, subset: FeatureSubset) -> ScoreCard:
        value = synthetic_objective(subset, self.landscape)
        return ScoreCard(
            guide_score=value,
            test_score=value,
            test_report={name: value for name in REPORT_METRICS},
        )


class EvaluatorFactory:
    """Factory class to create and configure evaluation components."""

    @staticmethod
    def create_evaluator(
        config: EvaluatorConfig,
        splits: Optional[Tuple[RankingDataset, RankingDataset, RankingDataset]] = None,
        landscape: Optional[SyntheticLandscape] = None,
        cache: Optional[ScoreCache] = None,
        data_digest: Optional[str] = None,
    ) -> SubsetEvaluator:
        """Create the evaluator selected by ``config.ranker``.

        Args:
            config: Evaluator configuration
            splits: train, validation and test datasets (coordinate_ascent)
            landscape: Synthetic landscape (synthetic)
            cache: Shared score cache; a private one is created when omitted
            data_digest: Precomputed identity of the data files

        Returns:
            Configured SubsetEvaluator

        Raises:
            ConfigError: the inputs required by the selected ranker are missing
        """
        if config.ranker == "synthetic":
            if landscape is None:
                raise ConfigError(f"the synthetic ranker needs a landscape file ({LANDSCAPE_FILE})")
            if splits is not None and splits[0].n_features != landscape.n:
                raise DataError(f"landscape covers {landscape.n} features, data has {splits[0].n_features}")
            return SyntheticEvaluator(landscape, config, cache)
        if splits is None:
            raise ConfigError("the coordinate_ascent ranker needs train/validation/test data")
        return RankerEvaluator(*splits, config=config, cache=cache, data_digest=data_digest)

    @staticmethod
    def create_cache(config_manager: ConfigManager) -> ScoreCache:
        """Create the score cache, restoring the persisted one when the file exists."""
        cache_file = config_manager.cache_file
        if cache_file and Path(cache_file).is_file():
            return ScoreCache.load(cache_file, max_entries=config_manager.cache_size)
        return ScoreCache(max_entries=config_manager.cache_size)
