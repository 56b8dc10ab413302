"""Linear ranker trained by cyclic coordinate ascent on an IR metric.

Features are min-max normalized with train-split statistics. Each pass
visits the active features in a seeded random order and line-searches the
weight of one feature over a doubling grid of steps in both directions,
plus a sign flip and zero, keeping the best strictly improving value.
"""

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.preprocessing import MinMaxScaler

from rank_anneal.errors import DataError, EvaluationError
from rank_anneal.letor import QueryMatrix, RankingDataset
from rank_anneal.metrics import MetricSpec, QueryBatchScorer
from rank_anneal.subset import make_rng

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class MinMaxNormalizer:
    """Min-max scaling fitted on the train split and applied unchanged to every split.

    Values outside the train range map outside [0, 1]. Columns constant on
    train are degenerate and transform to 0.
    """

    scaler: MinMaxScaler

    @classmethod
    def fit(cls, features: np.ndarray) -> "MinMaxNormalizer":
        if features.shape[0] == 0:
            raise DataError("cannot fit normalization on an empty training split")
        return cls(scaler=MinMaxScaler().fit(features))

    @property
    def degenerate(self) -> np.ndarray:
        """Features constant on the training split."""
        return self.scaler.data_range_ == 0

    def transform(self, features: np.ndarray) -> np.ndarray:
        return np.where(self.degenerate, 0.0, self.scaler.transform(features))


class CoordinateAscentRanker:
    """Cyclic coordinate ascent over the weights of a linear scoring function."""

    def __init__(
        self,
        metric: MetricSpec,
        passes: int = 3,
        base_step: float = 0.01,
        n_steps: int = 8,
        tolerance: float = 1e-9,
        seed: int = 0,
    ):
        self.metric = metric
        self.passes = passes
        self.steps = base_step * np.exp2(np.arange(n_steps))
        self.tolerance = tolerance
        self.seed = seed

    def fit(self, train: QueryMatrix, active: Sequence[int], normalizer: MinMaxNormalizer) -> np.ndarray:
        """Weights for ``active`` feature columns (0-based), in the given order.

        Raises:
            EvaluationError: no active feature
            DataError: no training query
        """
        active = np.asarray(active, dtype=np.int64)
        if active.size == 0:
            raise EvaluationError("coordinate ascent needs at least one active feature")
        if train.n_queries == 0:
            raise DataError("coordinate ascent needs at least one training query")

        columns = normalizer.transform(train.features)[:, active]
        usable = ~normalizer.degenerate[active]
        weights = np.where(usable, 1.0 / max(1, int(usable.sum())), 0.0)
        if not usable.any():
            return weights

        scorer = QueryBatchScorer(train, self.metric)
        current = columns @ weights
        best = float(scorer.score(current)[0])
        rng = make_rng(self.seed)

        for pass_no in range(self.passes):
            improved = False
            for position in rng.permutation(np.flatnonzero(usable)):
                w = weights[position]
                candidates = np.concatenate([w + self.steps, w - self.steps, [-w, 0.0]])
                column = columns[:, position]
                trial_scores = current[None, :] + (candidates - w)[:, None] * column[None, :]
                values = scorer.score(trial_scores)
                pick = int(np.argmax(values))
                if values[pick] > best + self.tolerance:
                    best = float(values[pick])
                    weights[position] = candidates[pick]
                    current = trial_scores[pick]
                    improved = True
            logger.debug("coordinate ascent pass=%d train_%s=%.6f", pass_no, self.metric.name, best)
            if not improved:
                break

        return weights

    @staticmethod
    def predict(
        matrix: QueryMatrix, active: Sequence[int], weights: np.ndarray, normalizer: MinMaxNormalizer
    ) -> np.ndarray:
        active = np.asarray(active, dtype=np.int64)
        return normalizer.transform(matrix.features)[:, active] @ weights


def train_coordinate_ascent(
    train: RankingDataset, active: Sequence[int], seed: int = 0, metric: str = "ndcg@10", passes: int = 3
) -> np.ndarray:
    """Fit a ranker on ``train`` restricted to ``active`` columns; weights apply to normalized features."""
    matrix = train.matrix()
    normalizer = MinMaxNormalizer.fit(matrix.features)
    ranker = CoordinateAscentRanker(MetricSpec.parse(metric), passes=passes, seed=seed)
    return ranker.fit(matrix, active, normalizer)
