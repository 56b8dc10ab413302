"""Run outcomes shared by the annealer and the beam search."""

import csv
import io
from pathlib import Path
from typing import Any, Dict, Literal, NamedTuple, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict

from rank_anneal.subset import FeatureSubset

TRACE_COLUMNS = ("iteration", "T", "current", "best", "accepted", "restarted")


class TraceEntry(NamedTuple):
    iteration: int
    temperature: float
    current_score: float
    best_score: float
    accepted: bool
    restarted: bool
    # Set only when a non-improving move went through the metropolis test.
    acceptance_probability: Optional[float] = None
    uniform_draw: Optional[float] = None


class RunRecord(BaseModel):
    """Outcome of one search run over subsets of size ``k``."""

    model_config = ConfigDict(frozen=True)

    algorithm: Literal["sa", "hc", "lbs"]
    n: int
    k: int
    seed: int
    best_subset_hex: str
    best_guide_score: float
    best_test_score: float
    best_test_report: Dict[str, float] = {}
    initial_guide_score: float
    trace: Tuple[TraceEntry, ...] = ()
    evaluations_used: int
    wall_ms: float
    settings: Dict[str, Any] = {}

    @property
    def best_subset(self) -> FeatureSubset:
        return FeatureSubset.from_hex(self.best_subset_hex, self.n)


def format_trace_csv(record: RunRecord) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for entry in record.trace:
        writer.writerow(
            [
                entry.iteration,
                repr(float(entry.temperature)),
                repr(float(entry.current_score)),
                repr(float(entry.best_score)),
                int(entry.accepted),
                int(entry.restarted),
            ]
        )
    return buffer.getvalue()


def write_trace_csv(record: RunRecord, path: Union[str, Path]) -> None:
    Path(path).write_text(format_trace_csv(record), encoding="utf-8")
