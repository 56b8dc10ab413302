"""Simulated annealing over fixed-size feature subsets.

One iteration draws a single neighbor of the current state and evaluates
it. Improving moves are always taken; the rest pass a metropolis test at
the current temperature. The temperature advances one schedule step once
enough moves were accepted at it, or after a step cap. A stagnation counter
sends the search back to the best state seen when it reaches its threshold.
"""

import logging
import math
import statistics
import time
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from rank_anneal.errors import ConfigError, ScheduleError
from rank_anneal.evaluator import SubsetEvaluator
from rank_anneal.records import RunRecord, TraceEntry
from rank_anneal.subset import (
    NeighborhoodKind,
    check_size,
    derive_seed,
    make_rng,
    neighbor,
    random_subset,
)

logger = logging.getLogger(__name__)

CALIBRATION_SAMPLES = 20
CALIBRATION_ACCEPTANCE = 0.8
# Stream id mixed into the seed for calibration draws.
_CALIBRATION_STREAM = 0xCA1


class CoolingScheme(BaseModel):
    """Temperature schedule; ``t_initial`` is the starting temperature T0."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["geometric", "logarithmic", "fast"] = "fast"
    t_initial: float = Field(default=0.05, gt=0)
    alpha: float = Field(default=0.9, gt=0, le=1)
    t0: int = Field(default=10, ge=1)

    def temperature_at(self, t: int) -> float:
        """Temperature after ``t`` schedule updates.

        >>> CoolingScheme(kind="geometric", t_initial=100, alpha=0.9).temperature_at(1)
        90.0
        """
        if t < 0:
            raise ScheduleError(f"schedule step must be >= 0, got {t}")
        if self.kind == "geometric":
            return self.t_initial * self.alpha ** t
        if self.kind == "logarithmic":
            if t + self.t0 < 2:
                raise ScheduleError(f"logarithmic schedule undefined for t + t0 = {t + self.t0} < 2")
            return self.t_initial / math.log(t + self.t0)
        return self.t_initial / (1 + t)


class AnnealerConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    scheme: CoolingScheme = CoolingScheme()
    neighborhood: NeighborhoodKind = NeighborhoodKind.SWAP
    # None derives the budget from n and k with default_budget.
    budget: Optional[int] = Field(default=None, ge=1)
    budget_factor: float = Field(default=2.0, gt=0)
    budget_cap: int = Field(default=1000, ge=1)
    accept_quota: int = Field(default=10, ge=1)
    max_steps_per_temp: int = Field(default=50, ge=1)
    progress_threshold: Optional[int] = Field(default=25, ge=1)
    t_min: float = Field(default=1e-4, gt=0)
    seed: int = Field(default=0, ge=0)
    hill_climbing: bool = False
    calibrate: bool = False

    @model_validator(mode="after")
    def _check_floor(self) -> "AnnealerConfig":
        if self.t_min >= self.scheme.t_initial:
            raise ValueError(f"t_min={self.t_min} must be below T0={self.scheme.t_initial}")
        self.scheme.temperature_at(0)
        return self


def metropolis(delta_e: float, temperature: float) -> float:
    """Acceptance probability exp(delta_e / T) of a non-improving move.

    >>> round(metropolis(-0.1, 1.0), 6)
    0.904837
    """
    if temperature <= 0:
        raise ScheduleError(f"temperature must be positive, got {temperature}")
    if delta_e > 0:
        raise ValueError(f"metropolis applies to non-improving moves, got delta_e={delta_e}")
    return math.exp(delta_e / temperature)


def default_budget(n: int, k: int, c: float = 2.0, hard_cap: int = 1000) -> int:
    """min(ceil(c * k * (n - k)), hard_cap): proportional to the swap neighborhood size."""
    check_size(n, k)
    return min(math.ceil(c * k * (n - k)), hard_cap)


def calibrate_initial_temperature(
    k: int, evaluator: SubsetEvaluator, cfg: AnnealerConfig, samples: int = CALIBRATION_SAMPLES
) -> CoolingScheme:
    """Pick T0 so the median worsening move of a short random walk is accepted with p = 0.8.

    The walk uses its own generator derived from ``cfg.seed``, leaving the
    search stream untouched. When no worsening move is seen, or the result
    would not clear ``t_min``, the configured scheme is returned.
    """
    n = evaluator.n_features
    rng = make_rng(derive_seed(cfg.seed, _CALIBRATION_STREAM))
    state = random_subset(n, k, rng)
    state_score = evaluator.score(state)
    worsening = []
    for _ in range(samples):
        candidate = neighbor(state, cfg.neighborhood, rng)
        candidate_score = evaluator.score(candidate)
        if candidate_score < state_score:
            worsening.append(candidate_score - state_score)
        state, state_score = candidate, candidate_score

    if not worsening:
        logger.info("calibration saw no worsening move; keeping T0=%g", cfg.scheme.t_initial)
        return cfg.scheme
    t_initial = -statistics.median(worsening) / math.log(CALIBRATION_ACCEPTANCE)
    if t_initial <= cfg.t_min:
        logger.warning("calibrated T0=%g not above t_min=%g; keeping T0=%g", t_initial, cfg.t_min, cfg.scheme.t_initial)
        return cfg.scheme
    logger.info("calibrated T0=%g from %d worsening moves", t_initial, len(worsening))
    return cfg.scheme.model_copy(update={"t_initial": t_initial})


def anneal(k: int, evaluator: SubsetEvaluator, cfg: AnnealerConfig) -> RunRecord:
    """Search subsets of size ``k`` by simulated annealing.

    Args:
        k: Subset size, 1 <= k <= n - 1
        evaluator: Scores subsets; its guide score is maximized
        cfg: Schedule, neighborhood, budget and restart settings

    Returns:
        RunRecord with the best subset and a per-iteration trace

    Raises:
        SubsetError: k outside 1..n-1
        EvaluationError: propagated from the evaluator
    """
    n = evaluator.n_features
    check_size(n, k)
    budget = cfg.budget if cfg.budget is not None else default_budget(n, k, cfg.budget_factor, cfg.budget_cap)
    if budget < 1:
        raise ConfigError(f"iteration budget must be positive, got {budget}")

    started = time.perf_counter()
    evaluations = 0
    scheme = cfg.scheme
    if cfg.calibrate:
        scheme = calibrate_initial_temperature(k, evaluator, cfg)
        evaluations += CALIBRATION_SAMPLES + 1

    rng = make_rng(cfg.seed)
    current = random_subset(n, k, rng)
    current_card = evaluator.evaluate(current)
    evaluations += 1
    best, best_card = current, current_card
    initial_score = current_card.guide_score

    step = 0
    temperature = scheme.temperature_at(step)
    accepted_at_temperature = 0
    steps_at_temperature = 0
    stagnation = 0
    trace = []
    iteration = 0

    while iteration < budget and temperature > cfg.t_min:
        candidate = neighbor(current, cfg.neighborhood, rng)
        candidate_card = evaluator.evaluate(candidate)
        evaluations += 1
        delta_e = candidate_card.guide_score - current_card.guide_score

        probability: Optional[float] = None
        draw: Optional[float] = None
        if delta_e > 0:
            accepted = True
        elif cfg.hill_climbing:
            accepted = False
        else:
            probability = metropolis(delta_e, temperature)
            draw = float(rng.random())
            accepted = draw < probability

        if accepted:
            current, current_card = candidate, candidate_card
            accepted_at_temperature += 1
        if accepted and current_card.guide_score > best_card.guide_score:
            best, best_card = current, current_card
            stagnation = 0
        else:
            stagnation += 1

        restarted = False
        if cfg.progress_threshold is not None and stagnation >= cfg.progress_threshold:
            current, current_card = best, best_card
            stagnation = 0
            restarted = True
            logger.debug("restart from best iteration=%d best=%.6f", iteration, best_card.guide_score)

        trace.append(
            TraceEntry(
                iteration=iteration,
                temperature=temperature,
                current_score=current_card.guide_score,
                best_score=best_card.guide_score,
                accepted=accepted,
                restarted=restarted,
                acceptance_probability=probability,
                uniform_draw=draw,
            )
        )
        iteration += 1
        steps_at_temperature += 1
        if accepted_at_temperature >= cfg.accept_quota or steps_at_temperature >= cfg.max_steps_per_temp:
            step += 1
            temperature = scheme.temperature_at(step)
            accepted_at_temperature = 0
            steps_at_temperature = 0
            logger.debug("temperature update step=%d T=%g", step, temperature)

    wall_ms = (time.perf_counter() - started) * 1000.0
    algorithm = "hc" if cfg.hill_climbing else "sa"
    logger.info(
        "anneal done algorithm=%s k=%d seed=%d best=%.6f iterations=%d evaluations=%d wall_ms=%.1f",
        algorithm, k, cfg.seed, best_card.guide_score, iteration, evaluations, wall_ms,
    )
    return RunRecord(
        algorithm=algorithm,
        n=n,
        k=k,
        seed=cfg.seed,
        best_subset_hex=best.to_hex(),
        best_guide_score=best_card.guide_score,
        best_test_score=best_card.test_score,
        best_test_report=dict(best_card.test_report),
        initial_guide_score=initial_score,
        trace=tuple(trace),
        evaluations_used=evaluations,
        wall_ms=wall_ms,
        settings={
            "neighborhood": cfg.neighborhood.value,
            "scheme": scheme.kind,
            "t_initial": scheme.t_initial,
            "budget": budget,
        },
    )
