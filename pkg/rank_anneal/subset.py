"""Fixed-size feature subsets and their two neighborhoods.

A subset is a bit array over ``n`` features (bit ``i`` set means feature
``i + 1`` is used) with ``1 <= k <= n - 1`` bits set. Both neighborhoods
preserve ``k``.
"""

import math
from enum import Enum
from typing import Iterable, List

import numpy as np

from rank_anneal.errors import SubsetError


class NeighborhoodKind(str, Enum):
    SWAP = "swap"
    INSERTION = "insertion"


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator; one per run."""
    return np.random.Generator(np.random.Philox(seed))


def derive_seed(base_seed: int, *keys: int) -> int:
    """Stable 63-bit seed for ``(base_seed, *keys)``; independent of other keys."""
    state = np.random.SeedSequence([base_seed, *keys]).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 31 | int(state[1]) >> 1


class FeatureSubset:
    """Immutable bit array with a cached popcount."""

    __slots__ = ("_bits", "_k", "_hex")

    def __init__(self, bits: Iterable[bool]):
        array = np.array(list(bits) if not isinstance(bits, np.ndarray) else bits, dtype=bool)
        if array.ndim != 1 or array.size < 2:
            raise SubsetError("a feature subset needs at least 2 positions")
        array.setflags(write=False)
        self._bits = array
        self._k = int(array.sum())
        self._hex = None

    @classmethod
    def from_indices(cls, n: int, indices: Iterable[int]) -> "FeatureSubset":
        bits = np.zeros(n, dtype=bool)
        for index in indices:
            if not 0 <= index < n:
                raise SubsetError(f"feature index {index} outside 0..{n - 1}")
            bits[index] = True
        return cls(bits)

    @classmethod
    def from_hex(cls, text: str, n: int) -> "FeatureSubset":
        """Decode MSB-first lowercase hex (bit 0 is the most significant)."""
        try:
            value = int(text, 16)
        except ValueError:
            raise SubsetError(f"not a hex subset: {text!r}")
        if value >> n:
            raise SubsetError(f"hex subset {text!r} has bits beyond {n} features")
        return cls(char == "1" for char in format(value, f"0{n}b"))

    @property
    def bits(self) -> np.ndarray:
        return self._bits

    @property
    def n(self) -> int:
        return self._bits.size

    @property
    def k(self) -> int:
        return self._k

    def indices(self) -> np.ndarray:
        """0-based positions of selected features."""
        return np.flatnonzero(self._bits)

    def to_hex(self) -> str:
        if self._hex is None:
            value = int("".join("1" if bit else "0" for bit in self._bits), 2)
            self._hex = format(value, f"0{math.ceil(self.n / 4)}x")
        return self._hex

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeatureSubset):
            return NotImplemented
        return self.n == other.n and self.to_hex() == other.to_hex()

    def __hash__(self) -> int:
        return hash((self.n, self.to_hex()))

    def __lt__(self, other: "FeatureSubset") -> bool:
        return (self.n, self.to_hex()) < (other.n, other.to_hex())

    def __repr__(self) -> str:
        return f"FeatureSubset({''.join('1' if bit else '0' for bit in self._bits)})"


def check_size(n: int, k: int) -> None:
    if n < 2 or not 1 <= k <= n - 1:
        raise SubsetError(f"subset size k={k} must lie in 1..{n - 1} for n={n}")


def random_subset(n: int, k: int, rng: np.random.Generator) -> FeatureSubset:
    """Uniformly random k-subset of n features."""
    check_size(n, k)
    return FeatureSubset.from_indices(n, rng.choice(n, size=k, replace=False))


def _check_state(state: FeatureSubset) -> None:
    check_size(state.n, state.k)


def swap_neighbor(state: FeatureSubset, rng: np.random.Generator) -> FeatureSubset:
    """Clear one random set bit and set one random clear bit."""
    _check_state(state)
    ones = np.flatnonzero(state.bits)
    zeros = np.flatnonzero(~state.bits)
    i = ones[rng.integers(ones.size)]
    j = zeros[rng.integers(zeros.size)]
    bits = state.bits.copy()
    bits[i] = False
    bits[j] = True
    return FeatureSubset(bits)


def insertion_move(state: FeatureSubset, i: int, j: int) -> FeatureSubset:
    """Move the bit at ``j`` to ``i``, shifting the window between them by one.

    For ``i < j`` the window ``[i..j]`` rotates right; for ``i > j`` the
    window ``[j..i]`` rotates left.
    """
    n = state.n
    if not (0 <= i < n and 0 <= j < n) or i == j:
        raise SubsetError(f"insertion needs two distinct positions in 0..{n - 1}, got {i}, {j}")
    bits = state.bits.copy()
    if i < j:
        bits[i:j + 1] = np.roll(state.bits[i:j + 1], 1)
    else:
        bits[j:i + 1] = np.roll(state.bits[j:i + 1], -1)
    return FeatureSubset(bits)


def insertion_neighbor(state: FeatureSubset, rng: np.random.Generator) -> FeatureSubset:
    """Insertion move at two uniformly drawn distinct positions.

    The result equals ``state`` when the rotated window is bit-constant.
    """
    _check_state(state)
    n = state.n
    i = int(rng.integers(n))
    j = int(rng.integers(n - 1))
    if j >= i:
        j += 1
    return insertion_move(state, i, j)


def neighbor(state: FeatureSubset, kind: NeighborhoodKind, rng: np.random.Generator) -> FeatureSubset:
    if kind == NeighborhoodKind.SWAP:
        return swap_neighbor(state, rng)
    return insertion_neighbor(state, rng)


def enumerate_swap_neighbors(state: FeatureSubset) -> List[FeatureSubset]:
    """All k*(n-k) swap neighbors."""
    _check_state(state)
    result = []
    for i in np.flatnonzero(state.bits):
        for j in np.flatnonzero(~state.bits):
            bits = state.bits.copy()
            bits[i] = False
            bits[j] = True
            result.append(FeatureSubset(bits))
    return result


def enumerate_insertion_neighbors(state: FeatureSubset) -> List[FeatureSubset]:
    """Distinct insertion neighbors other than ``state`` itself, in (i, j) order."""
    _check_state(state)
    seen = {state}
    result = []
    for i in range(state.n):
        for j in range(state.n):
            if i == j:
                continue
            candidate = insertion_move(state, i, j)
            if candidate not in seen:
                seen.add(candidate)
                result.append(candidate)
    return result


def enumerate_neighbors(state: FeatureSubset, kind: NeighborhoodKind) -> List[FeatureSubset]:
    if kind == NeighborhoodKind.SWAP:
        return enumerate_swap_neighbors(state)
    return enumerate_insertion_neighbors(state)
