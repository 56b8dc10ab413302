import pytest
from pydantic import ValidationError

from rank_anneal.annealer import AnnealerConfig, CoolingScheme, anneal
from rank_anneal.beam import BeamConfig, BeamPool, beam_search, pool_update
from rank_anneal.errors import SubsetError
from rank_anneal.evaluator import SyntheticEvaluator
from rank_anneal.subset import FeatureSubset
from rank_anneal.synthetic import brute_force_optimum


def state(*indices: int) -> FeatureSubset:
    return FeatureSubset.from_indices(6, indices)


class TestPoolUpdate:
    """Test cases for inserting into the bounded pool."""

    def test_keeps_best_q_in_order(self):
        pool = BeamPool(q=2)
        pool = pool_update(pool, state(0), 0.5)
        pool = pool_update(pool, state(1), 0.7)
        pool = pool_update(pool, state(2), 0.6)
        assert [entry.subset for entry in pool.entries] == [state(1), state(2)]
        assert (pool.best.score, pool.worst.score) == (0.7, 0.6)

    def test_rejected_candidate_returns_same_pool(self):
        pool = pool_update(pool_update(BeamPool(q=2), state(0), 0.5), state(1), 0.7)
        assert pool_update(pool, state(2), 0.1) is pool
        assert pool_update(pool, state(1), 0.9) is pool

    def test_ties_go_to_earlier_insertion(self):
        pool = BeamPool(q=2)
        pool = pool_update(pool, state(3), 0.5)
        pool = pool_update(pool, state(0), 0.5)
        pool = pool_update(pool, state(1), 0.5)
        assert [entry.subset for entry in pool.entries] == [state(3), state(0)]

    def test_partial_pool_accepts_anything_new(self):
        pool = pool_update(BeamPool(q=3), state(0), 0.9)
        pool = pool_update(pool, state(1), 0.0)
        assert len(pool) == 2
        assert state(1) in pool

    def test_invalid_width(self):
        with pytest.raises(SubsetError):
            BeamPool(q=0)


class TestBeamSearch:
    """Test cases for local beam search."""

    def test_evaluation_count(self, two_basin_evaluator):
        record = beam_search(4, two_basin_evaluator, BeamConfig(beam_width=10, steps=7, seed=1))
        assert record.algorithm == "lbs"
        assert record.evaluations_used == 10 + 10 * 7
        assert len(record.trace) == 7

    def test_default_steps_match_annealing_budget(self, two_basin_evaluator):
        record = beam_search(4, two_basin_evaluator, BeamConfig(beam_width=10, seed=1))
        assert record.settings["steps"] == 7
        assert record.evaluations_used == 80

    def test_expand_all_scores_every_neighbor(self, two_basin_evaluator):
        record = beam_search(4, two_basin_evaluator, BeamConfig(beam_width=2, steps=1, expand_all=True))
        assert record.evaluations_used == 2 + 2 * 32

    def test_trace_rows(self, two_basin_evaluator):
        record = beam_search(4, two_basin_evaluator, BeamConfig(beam_width=5, steps=20, seed=2))
        best = [entry.best_score for entry in record.trace]
        assert best == sorted(best)
        assert all(entry.temperature == 0.0 for entry in record.trace)
        assert all(entry.current_score <= entry.best_score for entry in record.trace)
        assert record.best_guide_score == best[-1] >= record.initial_guide_score

    def test_exhaustive_seeding_finds_optimum(self, two_basin_evaluator):
        optimum, winners = brute_force_optimum(two_basin_evaluator.landscape, 4)
        record = beam_search(4, two_basin_evaluator, BeamConfig(beam_width=495, steps=1, seed=3))
        assert record.best_guide_score == optimum
        assert record.best_subset in winners
        assert record.initial_guide_score == optimum

    def test_width_one_is_hill_climbing(self, two_basin, synthetic_config):
        for seed in range(5):
            beam = beam_search(4, SyntheticEvaluator(two_basin, synthetic_config), BeamConfig(beam_width=1, steps=40, seed=seed))
            cfg = AnnealerConfig(
                scheme=CoolingScheme(kind="geometric", t_initial=1.0, alpha=1.0),
                budget=40,
                progress_threshold=None,
                hill_climbing=True,
                seed=seed,
            )
            climb = anneal(4, SyntheticEvaluator(two_basin, synthetic_config), cfg)
            assert beam.best_subset_hex == climb.best_subset_hex
            assert [entry.accepted for entry in beam.trace] == [entry.accepted for entry in climb.trace]
            assert beam.evaluations_used == climb.evaluations_used

    def test_workers_do_not_change_the_result(self, two_basin, synthetic_config):
        serial = beam_search(4, SyntheticEvaluator(two_basin, synthetic_config), BeamConfig(beam_width=8, steps=10, seed=4))
        threaded = beam_search(
            4, SyntheticEvaluator(two_basin, synthetic_config), BeamConfig(beam_width=8, steps=10, seed=4, workers=4)
        )
        assert threaded.trace == serial.trace
        assert threaded.best_subset_hex == serial.best_subset_hex

    def test_insertion_neighborhood(self, two_basin_evaluator):
        record = beam_search(4, two_basin_evaluator, BeamConfig(beam_width=4, steps=5, neighborhood="insertion"))
        assert record.settings["neighborhood"] == "insertion"
        assert record.best_subset.k == 4

    def test_too_few_distinct_subsets(self, two_basin_evaluator):
        with pytest.raises(SubsetError):
            beam_search(1, two_basin_evaluator, BeamConfig(beam_width=20))

    def test_invalid_config(self):
        with pytest.raises(ValidationError):
            BeamConfig(beam_width=0)
