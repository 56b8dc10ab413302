import numpy as np
import pytest

from rank_anneal.errors import DataError, EvaluationError
from rank_anneal.letor import parse_letor
from rank_anneal.metrics import MetricSpec, QueryBatchScorer
from rank_anneal.ranker import (
    CoordinateAscentRanker,
    MinMaxNormalizer,
    train_coordinate_ascent,
)

NDCG10 = MetricSpec.parse("ndcg@10")

# Query 1 needs both features to put its relevant document first; query 2
# holds two identical documents, so no weighting can beat file order there.
TWO_FEATURE_LETOR = (
    "0 qid:1 1:0.9 2:0.0 # d2\n"
    "0 qid:1 1:0.0 2:0.9 # d3\n"
    "2 qid:1 1:0.6 2:0.6 # d1\n"
    "0 qid:2 1:1.0 2:1.0 # t1\n"
    "2 qid:2 1:1.0 2:1.0 # t2\n"
)


def graded_dataset(sign: float):
    """Feature 1 equals sign * relevance; feature 2 is noise."""
    rng = np.random.default_rng(4)
    lines = []
    for qid in range(1, 7):
        grades = [0, 1, 2, 0, 1, 0]
        rng.shuffle(grades)
        for grade in grades:
            lines.append(f"{grade} qid:{qid} 1:{sign * grade!r} 2:{float(rng.random())!r}\n")
    return parse_letor(lines)


def train_score(dataset, active, weights):
    matrix = dataset.matrix()
    normalizer = MinMaxNormalizer.fit(matrix.features)
    scores = CoordinateAscentRanker.predict(matrix, active, weights, normalizer)
    return float(QueryBatchScorer(matrix, NDCG10).score(scores)[0])


class TestMinMaxNormalizer:
    """Test cases for train-split feature scaling."""

    def test_scales_to_unit_interval(self):
        features = np.array([[1.0, 5.0], [3.0, 5.0], [2.0, 5.0]])
        normalizer = MinMaxNormalizer.fit(features)
        np.testing.assert_allclose(normalizer.transform(features), [[0.0, 0.0], [1.0, 0.0], [0.5, 0.0]])
        np.testing.assert_array_equal(normalizer.degenerate, [False, True])

    def test_other_splits_use_train_statistics(self):
        normalizer = MinMaxNormalizer.fit(np.array([[0.0, 10.0, 4.0], [2.0, 20.0, 8.0]]))
        held_out = np.array([[4.0, 15.0, 2.0]])
        np.testing.assert_allclose(normalizer.transform(held_out), [[2.0, 0.5, -0.5]])

    def test_degenerate_column_is_zero_on_held_out_data(self):
        normalizer = MinMaxNormalizer.fit(np.array([[1.0, 7.0], [2.0, 7.0]]))
        np.testing.assert_allclose(normalizer.transform(np.array([[1.5, 9.0]])), [[0.5, 0.0]])

    def test_empty_split(self):
        with pytest.raises(DataError):
            MinMaxNormalizer.fit(np.zeros((0, 3)))


class TestCoordinateAscent:
    """Test cases for training the linear ranker."""

    def test_perfect_feature(self):
        dataset = graded_dataset(1.0)
        weights = train_coordinate_ascent(dataset, [0])
        assert weights[0] > 0
        assert train_score(dataset, [0], weights) == pytest.approx(1.0)

    def test_negated_feature_gets_negative_weight(self):
        dataset = graded_dataset(-1.0)
        weights = train_coordinate_ascent(dataset, [0])
        assert weights[0] < 0
        assert train_score(dataset, [0], weights) == pytest.approx(1.0)

    def test_two_features_beat_one(self):
        dataset = parse_letor(TWO_FEATURE_LETOR)
        single = train_coordinate_ascent(dataset, [0])
        both = train_coordinate_ascent(dataset, [0, 1])
        ceiling = (1.0 + 1.0 / np.log2(3)) / 2
        assert train_score(dataset, [0], single) == pytest.approx(1.0 / np.log2(3), abs=1e-9)
        assert train_score(dataset, [0, 1], both) >= ceiling - 0.01

    def test_constant_feature_gets_zero_weight(self):
        dataset = parse_letor("1 qid:1 1:0.5 2:0.1\n0 qid:1 1:0.5 2:0.9\n2 qid:2 1:0.5 2:0.4\n")
        weights = train_coordinate_ascent(dataset, [0, 1])
        assert weights[0] == 0.0

    def test_all_constant_features(self):
        dataset = parse_letor("1 qid:1 1:0.5 2:0.1\n0 qid:1 1:0.5 2:0.1\n")
        np.testing.assert_array_equal(train_coordinate_ascent(dataset, [0, 1]), [0.0, 0.0])

    def test_seeded_fit_is_deterministic(self, synthetic_splits):
        train = synthetic_splits[0]
        first = train_coordinate_ascent(train, [0, 1, 4], seed=9)
        second = train_coordinate_ascent(train, [0, 1, 4], seed=9)
        np.testing.assert_array_equal(first, second)

    def test_no_active_feature(self, sample_dataset):
        with pytest.raises(EvaluationError):
            train_coordinate_ascent(sample_dataset, [])

    def test_no_training_query(self):
        empty = parse_letor("", declared_n=3)
        ranker = CoordinateAscentRanker(NDCG10)
        with pytest.raises(DataError):
            ranker.fit(empty.matrix(), [0], MinMaxNormalizer.fit(np.zeros((1, 3))))
