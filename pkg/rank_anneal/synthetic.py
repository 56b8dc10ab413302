"""Synthetic objectives and desk-scale ranking corpora.

A landscape scores a subset S in closed form::

    clamp01((sum of u_i over S - sum of r_ij over pairs in S) / sum of all u_i)

Small landscapes (n <= 14) can be enumerated exhaustively, which gives the
search tests an exact global optimum to compare against.
"""

import functools
import hashlib
import itertools
import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from rank_anneal.errors import DataError
from rank_anneal.letor import SPLIT_FILES, Document, QueryGroup, RankingDataset, write_letor
from rank_anneal.subset import FeatureSubset, check_size, make_rng

logger = logging.getLogger(__name__)

LANDSCAPE_FILE = "landscape.json"
BRUTE_FORCE_LIMIT = 14


class SyntheticLandscape(BaseModel):
    """Per-feature utilities and pairwise redundancy penalties (0-based indices)."""

    model_config = ConfigDict(frozen=True)

    utilities: Tuple[float, ...]
    penalties: Tuple[Tuple[int, int, float], ...] = ()
    planted: Tuple[int, ...] = ()

    @model_validator(mode="after")
    def _check(self) -> "SyntheticLandscape":
        n = len(self.utilities)
        if n < 2:
            raise ValueError("a landscape needs at least 2 features")
        if any(u < 0 for u in self.utilities) or sum(self.utilities) <= 0:
            raise ValueError("utilities must be non-negative with a positive total")
        for i, j, r in self.penalties:
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise ValueError(f"penalty pair ({i}, {j}) outside 0..{n - 1}")
            if r < 0:
                raise ValueError(f"penalty for ({i}, {j}) must be non-negative")
        if any(not 0 <= p < n for p in self.planted):
            raise ValueError("planted feature index out of range")
        return self

    @property
    def n(self) -> int:
        return len(self.utilities)

    def penalty_matrix(self) -> np.ndarray:
        return _arrays(self)[1]

    def digest(self) -> str:
        return hashlib.sha256(self.model_dump_json().encode("utf-8")).hexdigest()


def synthetic_objective(subset: FeatureSubset, landscape: SyntheticLandscape) -> float:
    """Closed-form, trainer-free score of ``subset`` on ``landscape``."""
    if subset.n != landscape.n:
        raise DataError(f"subset over {subset.n} features, landscape over {landscape.n}")
    utilities, penalties = _arrays(landscape)
    chosen = subset.bits
    gain = float(utilities[chosen].sum())
    loss = float(penalties[np.ix_(chosen, chosen)].sum())
    return min(1.0, max(0.0, (gain - loss) / float(utilities.sum())))


@functools.lru_cache(maxsize=64)
def _arrays(landscape: SyntheticLandscape) -> Tuple[np.ndarray, np.ndarray]:
    utilities = np.asarray(landscape.utilities, dtype=np.float64)
    penalties = np.zeros((landscape.n, landscape.n))
    for i, j, r in landscape.penalties:
        penalties[min(i, j), max(i, j)] += r
    return utilities, penalties


def brute_force_optimum(landscape: SyntheticLandscape, k: int) -> Tuple[float, List[FeatureSubset]]:
    """Best score over all k-subsets and every subset attaining it."""
    n = landscape.n
    check_size(n, k)
    if n > BRUTE_FORCE_LIMIT:
        raise DataError(f"exhaustive enumeration is limited to n <= {BRUTE_FORCE_LIMIT}")
    best, winners = -1.0, []
    for combo in itertools.combinations(range(n), k):
        subset = FeatureSubset.from_indices(n, combo)
        value = synthetic_objective(subset, landscape)
        if value > best:
            best, winners = value, [subset]
        elif value == best:
            winners.append(subset)
    return best, winners


def two_basin_landscape() -> SyntheticLandscape:
    """n=12 landscape with a global optimum {0..3} and a decoy local optimum {4..7}.

    Features 0-3 are complementary, 4-7 are individually weaker and clash
    with 0-3, 8-11 carry little utility. Under swaps the decoy is a strict
    local optimum whose basin holds about a quarter of all 4-subsets.
    """
    utilities = (3.0,) * 4 + (2.0,) * 4 + (0.5,) * 4
    penalties = tuple((g, d, 1.1) for g in range(4) for d in range(4, 8))
    return SyntheticLandscape(utilities=utilities, penalties=penalties, planted=(0, 1, 2, 3))


def make_synthetic(
    n: int,
    queries: int,
    seed: int,
    planted: Optional[Sequence[int]] = None,
    docs_per_query: Tuple[int, int] = (12, 20),
    noise: float = 0.1,
) -> Tuple[RankingDataset, RankingDataset, RankingDataset, SyntheticLandscape]:
    """Generate train/validation/test splits with a planted informative subset.

    Relevance (0, 1, 2) is a noisy linear function of the planted features.
    Up to ``len(planted)`` further features are noisy copies of planted ones
    and the rest are pure noise. The returned landscape mirrors that design.
    """
    if n < 2:
        raise DataError(f"synthetic data needs n >= 2, got {n}")
    if queries < 0:
        raise DataError(f"query count must be non-negative, got {queries}")
    rng = make_rng(seed)
    planted = tuple(sorted(planted)) if planted is not None else tuple(range(max(1, n // 3)))
    if not planted or any(not 0 <= p < n for p in planted) or len(planted) >= n:
        raise DataError(f"planted subset {planted} must be a proper subset of 0..{n - 1}")

    others = [i for i in range(n) if i not in planted]
    copies: Dict[int, int] = {column: planted[idx] for idx, column in enumerate(others[: len(planted)])}
    weights = rng.uniform(0.5, 1.5, size=len(planted))

    groups = []
    for q in range(queries):
        size = int(rng.integers(docs_per_query[0], docs_per_query[1] + 1))
        features = rng.uniform(0.0, 1.0, size=(size, n))
        for column, source in copies.items():
            features[:, column] = np.clip(features[:, source] + rng.normal(0.0, 0.15, size=size), 0.0, 1.0)
        latent = features[:, list(planted)] @ weights + rng.normal(0.0, noise, size=size)
        grades = np.zeros(size, dtype=np.int64)
        order = np.argsort(-latent, kind="stable")
        grades[order[: max(1, size // 5)]] = 2
        grades[order[max(1, size // 5): max(2, size // 2)]] = 1
        qid = str(q + 1)
        documents = []
        for row in range(size):
            values = np.round(features[row], 6)
            values.setflags(write=False)
            documents.append(Document(features=values, relevance=int(grades[row]), doc_id=f"{qid}-{row + 1}"))
        groups.append(QueryGroup(query_id=qid, documents=tuple(documents)))

    n_train = int(round(queries * 0.6))
    n_vali = int(round(queries * 0.2))
    splits = (
        RankingDataset(n_features=n, groups=tuple(groups[:n_train]), split="train"),
        RankingDataset(n_features=n, groups=tuple(groups[n_train:n_train + n_vali]), split="validation"),
        RankingDataset(n_features=n, groups=tuple(groups[n_train + n_vali:]), split="test"),
    )

    utilities = np.zeros(n)
    utilities[list(planted)] = weights
    penalties = []
    for column, source in copies.items():
        source_weight = float(weights[planted.index(source)])
        utilities[column] = 0.8 * source_weight
        penalties.append((source, column, 0.8 * source_weight))
    landscape = SyntheticLandscape(
        utilities=tuple(float(round(u, 6)) for u in utilities),
        penalties=tuple((i, j, float(round(r, 6))) for i, j, r in penalties),
        planted=planted,
    )
    logger.info("synthetic corpus n=%d queries=%d planted=%s seed=%d", n, queries, list(planted), seed)
    return splits[0], splits[1], splits[2], landscape


def write_synthetic(
    out_dir: Union[str, Path],
    splits: Tuple[RankingDataset, RankingDataset, RankingDataset],
    landscape: SyntheticLandscape,
) -> Path:
    """Write the three LETOR files plus landscape.json into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for dataset in splits:
        write_letor(dataset, out_dir / SPLIT_FILES[dataset.split])
    payload = json.loads(landscape.model_dump_json())
    (out_dir / LANDSCAPE_FILE).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return out_dir


def read_landscape(path: Union[str, Path]) -> Optional[SyntheticLandscape]:
    """Landscape stored next to a fold, or None when the fold has none."""
    path = Path(path)
    if path.is_dir():
        path = path / LANDSCAPE_FILE
    if not path.is_file():
        return None
    return SyntheticLandscape.model_validate_json(path.read_text(encoding="utf-8"))
