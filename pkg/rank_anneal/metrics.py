"""IR quality measures: NDCG@k and (optionally truncated) MAP.

Gain is ``2**rel - 1`` and the discount at 1-based rank ``i`` is
``log2(i + 1)``. A document is relevant for MAP when its grade is >= 1.
Queries without relevant documents score 0 unless ``skip_empty`` is set.
"""

import re
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np

from rank_anneal.errors import ConfigError
from rank_anneal.letor import QueryMatrix

# Upper bound on candidates x queries x padded-length cells sorted at once.
_BATCH_CELLS = 8_000_000

_METRIC_NAME = re.compile(r"^(ndcg|map)(?:@(\d+))?$")


def _as_grades(ranked: Sequence[int]) -> np.ndarray:
    grades = np.asarray(ranked, dtype=np.float64)
    if grades.ndim != 1 or grades.size == 0:
        raise ValueError("a ranked list needs at least one relevance grade")
    return grades


def _discounts(length: int) -> np.ndarray:
    return 1.0 / np.log2(np.arange(2, length + 2, dtype=np.float64))


def dcg_at_k(ranked: Sequence[int], k: int) -> float:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    grades = _as_grades(ranked)[:k]
    return float(np.sum((np.exp2(grades) - 1.0) * _discounts(grades.size)))


def ndcg_at_k(ranked: Sequence[int], k: int) -> float:
    """NDCG@k of grades listed in predicted order; 0.0 when no document is relevant.

    >>> round(ndcg_at_k([0, 1, 2], 3), 6)
    0.586885
    """
    ideal = dcg_at_k(sorted(_as_grades(ranked), reverse=True), k)
    if ideal == 0.0:
        return 0.0
    return dcg_at_k(ranked, k) / ideal


def average_precision(ranked: Sequence[int]) -> float:
    """Mean of precision@i over relevant positions i, divided by all relevant documents.

    >>> round(average_precision([1, 0, 1, 0]), 6)
    0.833333
    """
    relevant = _as_grades(ranked) >= 1
    total = int(relevant.sum())
    if total == 0:
        return 0.0
    precision = np.cumsum(relevant) / np.arange(1, relevant.size + 1)
    return float(np.sum(precision[relevant]) / total)


def map_at_k(ranked: Sequence[int], k: int) -> float:
    """Average precision truncated at k, normalized by min(R, k)."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    relevant = _as_grades(ranked) >= 1
    total = int(relevant.sum())
    if total == 0:
        return 0.0
    head = relevant[:k]
    precision = np.cumsum(head) / np.arange(1, head.size + 1)
    return float(np.sum(precision[head]) / min(total, k))


def mean_over_queries(per_query_scores: Sequence[float]) -> float:
    scores = np.asarray(per_query_scores, dtype=np.float64)
    if scores.size == 0:
        raise ValueError("cannot average an empty list of query scores")
    return float(scores.mean())


def rank_grades(scores: Sequence[float], grades: Sequence[int]) -> np.ndarray:
    """Grades reordered by descending score; ties keep the original order."""
    order = np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")
    return np.asarray(grades)[order]


@dataclass(frozen=True)
class MetricSpec:
    kind: Literal["ndcg", "map"]
    k: Optional[int] = None
    skip_empty: bool = False

    def __post_init__(self):
        if self.kind == "ndcg" and self.k is None:
            raise ConfigError("ndcg needs a cutoff, e.g. ndcg@10")
        if self.k is not None and self.k < 1:
            raise ConfigError(f"metric cutoff must be >= 1, got {self.k}")

    @classmethod
    def parse(cls, name: str, skip_empty: bool = False) -> "MetricSpec":
        match = _METRIC_NAME.match(name.strip().lower())
        if match is None:
            raise ConfigError(f"unknown metric {name!r}; expected ndcg@k, map or map@k")
        kind, k = match.groups()
        return cls(kind=kind, k=int(k) if k is not None else None, skip_empty=skip_empty)

    @property
    def name(self) -> str:
        return self.kind if self.k is None else f"{self.kind}@{self.k}"

    def score_list(self, ranked: Sequence[int]) -> float:
        if self.kind == "ndcg":
            return ndcg_at_k(ranked, self.k)
        if self.k is None:
            return average_precision(ranked)
        return map_at_k(ranked, self.k)


class QueryBatchScorer:
    """Scores many candidate score vectors over all queries of one split at once.

    Queries are padded to the longest one; padding sorts last and carries
    grade 0, so it never changes a metric value.
    """

    def __init__(self, matrix: QueryMatrix, spec: MetricSpec):
        self.spec = spec
        sizes = np.diff(matrix.offsets)
        self.n_queries = len(sizes)
        self.width = int(sizes.max()) if self.n_queries else 0

        positions = np.arange(self.width)
        self._valid = positions[None, :] < sizes[:, None]
        self._index = np.where(self._valid, matrix.offsets[:-1, None] + positions[None, :], 0)
        self._labels = np.where(self._valid, matrix.labels[self._index], 0).astype(np.float64)

        if spec.kind == "ndcg":
            ideal = -np.sort(-self._labels, axis=1)[:, : spec.k]
            self._ideal = ((np.exp2(ideal) - 1.0) * _discounts(ideal.shape[1])).sum(axis=1)
            self.has_relevant = self._ideal > 0
        else:
            self._relevant_total = (self._labels >= 1).sum(axis=1)
            self.has_relevant = self._relevant_total > 0

    def per_query(self, scores: np.ndarray) -> np.ndarray:
        """Metric per query for each candidate row of ``scores`` (shape C x n_docs)."""
        scores = np.atleast_2d(np.asarray(scores, dtype=np.float64))
        if self.n_queries == 0:
            return np.zeros((scores.shape[0], 0))
        chunk = max(1, _BATCH_CELLS // max(1, self.n_queries * self.width))
        parts = [self._per_query_chunk(scores[start:start + chunk]) for start in range(0, scores.shape[0], chunk)]
        return np.concatenate(parts, axis=0)

    def _per_query_chunk(self, scores: np.ndarray) -> np.ndarray:
        padded = np.where(self._valid, scores[:, self._index], -np.inf)
        order = np.argsort(-padded, axis=-1, kind="stable")
        ranked = np.take_along_axis(np.broadcast_to(self._labels, padded.shape), order, axis=-1)

        if self.spec.kind == "ndcg":
            head = ranked[..., : self.spec.k]
            dcg = ((np.exp2(head) - 1.0) * _discounts(head.shape[-1])).sum(axis=-1)
            safe = np.where(self.has_relevant, self._ideal, 1.0)
            return np.where(self.has_relevant, dcg / safe, 0.0)

        relevant = ranked >= 1
        if self.spec.k is not None:
            relevant = relevant[..., : self.spec.k]
            denominator = np.minimum(self._relevant_total, self.spec.k)
        else:
            denominator = self._relevant_total
        precision = np.cumsum(relevant, axis=-1) / np.arange(1, relevant.shape[-1] + 1)
        hits = (precision * relevant).sum(axis=-1)
        return np.where(self.has_relevant, hits / np.maximum(denominator, 1), 0.0)

    def score(self, scores: np.ndarray) -> np.ndarray:
        """Mean metric per candidate row, honouring ``skip_empty``."""
        per_query = self.per_query(scores)
        if self.spec.skip_empty:
            per_query = per_query[:, self.has_relevant]
        if per_query.shape[1] == 0:
            return np.zeros(per_query.shape[0])
        return per_query.mean(axis=1)
