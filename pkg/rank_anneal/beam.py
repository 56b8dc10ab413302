"""Local beam search over fixed-size feature subsets.

The pool holds the ``q`` best distinct states seen so far. Each step draws
one neighbor per pool member (or every neighbor, with ``expand_all``) and
offers it to the pool only when it scores strictly above its parent.
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field

from rank_anneal.annealer import default_budget
from rank_anneal.errors import SubsetError
from rank_anneal.evaluator import ScoreCard, SubsetEvaluator
from rank_anneal.records import RunRecord, TraceEntry
from rank_anneal.subset import (
    FeatureSubset,
    NeighborhoodKind,
    check_size,
    enumerate_neighbors,
    make_rng,
    neighbor,
    random_subset,
)

logger = logging.getLogger(__name__)


class BeamConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    beam_width: int = Field(default=10, ge=1)
    # None picks ceil(default_budget / beam_width) so q * steps matches an annealing budget.
    steps: Optional[int] = Field(default=None, ge=1)
    budget_factor: float = Field(default=2.0, gt=0)
    budget_cap: int = Field(default=1000, ge=1)
    neighborhood: NeighborhoodKind = NeighborhoodKind.SWAP
    seed: int = Field(default=0, ge=0)
    expand_all: bool = False
    workers: int = Field(default=1, ge=1)


@dataclass(frozen=True)
class PoolEntry:
    subset: FeatureSubset
    score: float
    seq: int
    card: Optional[ScoreCard] = field(default=None, compare=False)

    def sort_key(self) -> Tuple[float, int, str]:
        return (-self.score, self.seq, self.subset.to_hex())


@dataclass(frozen=True)
class BeamPool:
    """Up to ``q`` distinct states, best first; ties go to the earlier insertion."""

    q: int
    entries: Tuple[PoolEntry, ...] = ()
    next_seq: int = 0

    def __post_init__(self):
        if self.q < 1:
            raise SubsetError(f"beam width must be >= 1, got {self.q}")

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, subset: FeatureSubset) -> bool:
        return any(entry.subset == subset for entry in self.entries)

    @property
    def best(self) -> PoolEntry:
        return self.entries[0]

    @property
    def worst(self) -> PoolEntry:
        return self.entries[-1]


def pool_update(
    pool: BeamPool, subset: FeatureSubset, score: float, card: Optional[ScoreCard] = None
) -> BeamPool:
    """Offer ``(subset, score)`` to the pool; returns ``pool`` itself when nothing changes."""
    if subset in pool:
        return pool
    entry = PoolEntry(subset=subset, score=score, seq=pool.next_seq, card=card)
    entries = tuple(sorted(pool.entries + (entry,), key=PoolEntry.sort_key)[: pool.q])
    if entry not in entries:
        return pool
    return BeamPool(q=pool.q, entries=entries, next_seq=pool.next_seq + 1)


def _evaluate_all(
    evaluator: SubsetEvaluator, subsets: Sequence[FeatureSubset], executor: Optional[ThreadPoolExecutor]
) -> List[ScoreCard]:
    if executor is None:
        return [evaluator.evaluate(subset) for subset in subsets]
    return list(executor.map(evaluator.evaluate, subsets))


def beam_search(k: int, evaluator: SubsetEvaluator, cfg: BeamConfig) -> RunRecord:
    """Run local beam search over subsets of size ``k``.

    Raises:
        SubsetError: k outside 1..n-1, or fewer than ``beam_width`` distinct k-subsets exist
    """
    n = evaluator.n_features
    check_size(n, k)
    q = cfg.beam_width
    if math.comb(n, k) < q:
        raise SubsetError(f"cannot seed {q} distinct subsets: only C({n}, {k}) = {math.comb(n, k)} exist")
    steps = cfg.steps if cfg.steps is not None else math.ceil(default_budget(n, k, cfg.budget_factor, cfg.budget_cap) / q)

    started = time.perf_counter()
    rng = make_rng(cfg.seed)
    seeds: List[FeatureSubset] = []
    while len(seeds) < q:
        subset = random_subset(n, k, rng)
        if subset not in seeds:
            seeds.append(subset)

    executor = ThreadPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None
    try:
        pool = BeamPool(q=q)
        cards = _evaluate_all(evaluator, seeds, executor)
        for subset, card in zip(seeds, cards):
            pool = pool_update(pool, subset, card.guide_score, card)
        evaluations = len(seeds)
        initial_score = pool.best.score

        trace = []
        for step in range(steps):
            members = pool.entries
            if cfg.expand_all:
                offers = [(member, cand) for member in members for cand in enumerate_neighbors(member.subset, cfg.neighborhood)]
            else:
                offers = [(member, neighbor(member.subset, cfg.neighborhood, rng)) for member in members]
            cards = _evaluate_all(evaluator, [cand for _, cand in offers], executor)
            evaluations += len(offers)

            changed = False
            for (parent, cand), card in zip(offers, cards):
                if card.guide_score > parent.score:
                    updated = pool_update(pool, cand, card.guide_score, card)
                    changed = changed or updated is not pool
                    pool = updated
            trace.append(
                TraceEntry(
                    iteration=step,
                    temperature=0.0,
                    current_score=pool.worst.score,
                    best_score=pool.best.score,
                    accepted=changed,
                    restarted=False,
                )
            )
    finally:
        if executor is not None:
            executor.shutdown(wait=True)

    best = pool.best
    wall_ms = (time.perf_counter() - started) * 1000.0
    logger.info(
        "beam search done k=%d q=%d seed=%d best=%.6f steps=%d evaluations=%d wall_ms=%.1f",
        k, q, cfg.seed, best.score, steps, evaluations, wall_ms,
    )
    return RunRecord(
        algorithm="lbs",
        n=n,
        k=k,
        seed=cfg.seed,
        best_subset_hex=best.subset.to_hex(),
        best_guide_score=best.card.guide_score,
        best_test_score=best.card.test_score,
        best_test_report=dict(best.card.test_report),
        initial_guide_score=initial_score,
        trace=tuple(trace),
        evaluations_used=evaluations,
        wall_ms=wall_ms,
        settings={
            "neighborhood": cfg.neighborhood.value,
            "beam_width": q,
            "steps": steps,
            "expand_all": cfg.expand_all,
        },
    )
