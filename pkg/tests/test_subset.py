from collections import Counter
from math import comb

import numpy as np
import pytest

from rank_anneal.errors import SubsetError
from rank_anneal.subset import (
    FeatureSubset,
    NeighborhoodKind,
    derive_seed,
    enumerate_insertion_neighbors,
    enumerate_neighbors,
    enumerate_swap_neighbors,
    insertion_move,
    insertion_neighbor,
    make_rng,
    neighbor,
    random_subset,
    swap_neighbor,
)


def subset(pattern: str) -> FeatureSubset:
    return FeatureSubset(char == "1" for char in pattern)


class TestFeatureSubset:
    """Test cases for the bit-array state."""

    def test_hex_is_msb_first(self):
        state = FeatureSubset.from_indices(6, [0, 5])
        assert state.to_hex() == "21"
        assert FeatureSubset.from_hex("21", 6) == state

    def test_hex_pads_to_nibbles(self):
        assert subset("0001").to_hex() == "1"
        assert FeatureSubset.from_indices(46, [45]).to_hex() == "0" * 11 + "1"

    def test_from_hex_rejects_overflow_and_garbage(self):
        with pytest.raises(SubsetError):
            FeatureSubset.from_hex("ff", 6)
        with pytest.raises(SubsetError):
            FeatureSubset.from_hex("zz", 6)

    def test_from_indices_out_of_range(self):
        with pytest.raises(SubsetError):
            FeatureSubset.from_indices(4, [4])

    def test_too_short(self):
        with pytest.raises(SubsetError):
            FeatureSubset([True])

    def test_bits_are_read_only(self):
        state = subset("1010")
        with pytest.raises(ValueError):
            state.bits[0] = False

    def test_value_semantics(self):
        assert subset("0110") == FeatureSubset.from_indices(4, [1, 2])
        assert len({subset("0110"), FeatureSubset.from_indices(4, [2, 1])}) == 1
        assert subset("0011") < subset("0110")
        assert (subset("0110").n, subset("0110").k) == (4, 2)
        np.testing.assert_array_equal(subset("0110").indices(), [1, 2])


class TestRandomSubset:
    """Test cases for uniform initial states."""

    def test_two_features_is_fair(self):
        rng = make_rng(7)
        counts = Counter(random_subset(2, 1, rng).to_hex() for _ in range(10_000))
        assert set(counts) == {"2", "1"}
        assert counts["2"] / 10_000 == pytest.approx(0.5, abs=0.02)

    @pytest.mark.parametrize("n, k", [(5, 5), (5, 0), (1, 1), (4, -1)])
    def test_size_out_of_range(self, n, k):
        with pytest.raises(SubsetError):
            random_subset(n, k, make_rng(0))

    def test_seeded_draws_repeat(self):
        first = [random_subset(20, 6, make_rng(42)) for _ in range(3)]
        assert first[0] == first[1] == first[2]
        assert first[0].k == 6


class TestSwapNeighbor:
    """Test cases for the swap neighborhood."""

    def test_forced_move(self):
        assert swap_neighbor(subset("10"), make_rng(0)) == subset("01")

    def test_neighbor_set_of_three_bits(self):
        rng = make_rng(3)
        seen = {swap_neighbor(subset("110"), rng) for _ in range(200)}
        assert seen == {subset("011"), subset("101")}
        assert set(enumerate_swap_neighbors(subset("110"))) == seen

    def test_random_applications(self):
        rng = make_rng(11)
        widths = set()
        for _ in range(10_000):
            n = int(rng.integers(2, 65))
            widths.add(n)
            state = random_subset(n, int(rng.integers(1, n)), rng)
            moved = swap_neighbor(state, rng)
            assert moved.k == state.k
            assert int(np.sum(moved.bits != state.bits)) == 2
            assert FeatureSubset.from_hex(moved.to_hex(), n) == moved
        assert widths == set(range(2, 65))

    def test_rejects_full_state(self):
        with pytest.raises(SubsetError):
            swap_neighbor(subset("11"), make_rng(0))


class TestInsertionNeighbor:
    """Test cases for the insertion (window rotation) neighborhood."""

    def test_rotate_right(self):
        assert insertion_move(subset("1001"), 0, 3) == subset("1100")

    def test_rotate_left(self):
        assert insertion_move(subset("1001"), 3, 0) == subset("0011")

    def test_constant_window_is_unchanged(self):
        assert insertion_move(subset("110010"), 0, 1) == subset("110010")

    def test_same_position_rejected(self):
        with pytest.raises(SubsetError):
            insertion_move(subset("1001"), 2, 2)

    def test_random_applications(self):
        rng = make_rng(13)
        for _ in range(10_000):
            n = int(rng.integers(2, 65))
            state = random_subset(n, int(rng.integers(1, n)), rng)
            i, j = rng.choice(n, size=2, replace=False)
            moved = insertion_move(state, int(i), int(j))
            lo, hi = min(i, j), max(i, j)
            assert moved.k == state.k
            np.testing.assert_array_equal(moved.bits[:lo], state.bits[:lo])
            np.testing.assert_array_equal(moved.bits[hi + 1:], state.bits[hi + 1:])
            shift = 1 if i < j else -1
            np.testing.assert_array_equal(moved.bits[lo:hi + 1], np.roll(state.bits[lo:hi + 1], shift))

    def test_random_neighbor_draws(self):
        rng = make_rng(19)
        for _ in range(10_000):
            n = int(rng.integers(2, 65))
            state = random_subset(n, int(rng.integers(1, n)), rng)
            moved = insertion_neighbor(state, rng)
            assert moved.k == state.k
            assert FeatureSubset.from_hex(moved.to_hex(), n) == moved
            changed = np.flatnonzero(moved.bits != state.bits)
            if changed.size:
                # the changed span is itself rotated by one place
                lo, hi = changed[0], changed[-1]
                window = state.bits[lo:hi + 1]
                assert any(np.array_equal(moved.bits[lo:hi + 1], np.roll(window, shift)) for shift in (1, -1))

    def test_random_neighbor_preserves_size(self):
        rng = make_rng(17)
        state = random_subset(12, 5, rng)
        for _ in range(1000):
            assert insertion_neighbor(state, rng).k == 5

    def test_enumeration_excludes_identity_and_duplicates(self):
        state = subset("1001")
        neighbors = enumerate_insertion_neighbors(state)
        assert state not in neighbors
        assert len(neighbors) == len(set(neighbors))
        assert subset("1100") in neighbors and subset("0011") in neighbors


class TestEnumeration:
    """Test cases for exhaustive neighborhood listing."""

    def test_single_bit(self):
        assert set(enumerate_swap_neighbors(subset("100"))) == {subset("010"), subset("001")}

    def test_size_law(self):
        rng = make_rng(19)
        for n in range(2, 11):
            for k in range(1, n):
                state = random_subset(n, k, rng)
                neighbors = enumerate_swap_neighbors(state)
                assert len(neighbors) == k * (n - k)
                assert len(set(neighbors)) == k * (n - k)

    def test_dispatch(self):
        state = subset("0110")
        assert enumerate_neighbors(state, NeighborhoodKind.SWAP) == enumerate_swap_neighbors(state)
        assert enumerate_neighbors(state, NeighborhoodKind.INSERTION) == enumerate_insertion_neighbors(state)

    def test_insertion_reaches_only_same_size_states(self):
        state = subset("011010")
        assert all(other.k == 3 for other in enumerate_insertion_neighbors(state))
        assert len(enumerate_insertion_neighbors(state)) < comb(6, 3)


class TestSeeding:
    """Test cases for reproducible random streams."""

    def test_same_seed_same_walk(self):
        def walk(seed):
            rng = make_rng(seed)
            state = random_subset(30, 8, rng)
            path = [state]
            for step in range(50):
                kind = NeighborhoodKind.SWAP if step % 2 else NeighborhoodKind.INSERTION
                state = neighbor(state, kind, rng)
                path.append(state)
            return path

        assert walk(5) == walk(5)
        assert walk(5) != walk(6)

    def test_derive_seed(self):
        assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
        assert derive_seed(1, 2, 3) != derive_seed(1, 2, 4)
        assert derive_seed(1, 2) != derive_seed(2, 2)
        assert 0 <= derive_seed(99, 7) < 2 ** 63
