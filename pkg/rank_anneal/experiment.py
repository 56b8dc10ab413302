"""Experiment protocol: sweep subset sizes, repeat runs, aggregate and compare.

Every (k, repeat) cell is an independent job seeded with
``derive_seed(base_seed, k, repeat)``. Finished runs are persisted one JSON
file each, so an interrupted sweep picks up where it stopped and the
aggregates can be recomputed from disk at any time.
"""

import csv
import hashlib
import io
import json
import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from rank_anneal.annealer import AnnealerConfig, anneal, default_budget
from rank_anneal.beam import BeamConfig, beam_search
from rank_anneal.errors import ConfigError, DataError
from rank_anneal.evaluator import EvaluatorConfig, EvaluatorFactory, ScoreCache, SubsetEvaluator
from rank_anneal.letor import digest_split_dir, load_split_dir
from rank_anneal.records import RunRecord
from rank_anneal.subset import NeighborhoodKind, derive_seed
from rank_anneal.synthetic import SyntheticLandscape, brute_force_optimum, read_landscape

logger = logging.getLogger(__name__)

SWEEP_HEADER = "# rank-anneal sweep v1"
SWEEP_COLUMNS = (
    "k",
    "algorithm",
    "neighborhood",
    "scheme",
    "mean_guide",
    "stderr_guide",
    "mean_test_ndcg10",
    "mean_test_map",
    "best_subset_hex",
    "mean_wall_ms",
    "repeats",
)

# Neighborhood n1/n2 crossed with cooling scheme s1/s2/s3.
SETTINGS: Dict[str, Tuple[NeighborhoodKind, str]] = {
    "n1s1": (NeighborhoodKind.SWAP, "geometric"),
    "n1s2": (NeighborhoodKind.SWAP, "logarithmic"),
    "n1s3": (NeighborhoodKind.SWAP, "fast"),
    "n2s1": (NeighborhoodKind.INSERTION, "geometric"),
    "n2s2": (NeighborhoodKind.INSERTION, "logarithmic"),
    "n2s3": (NeighborhoodKind.INSERTION, "fast"),
}
_NEIGHBORHOOD_CODES = {NeighborhoodKind.SWAP.value: "n1", NeighborhoodKind.INSERTION.value: "n2"}
_SCHEME_CODES = {"geometric": "s1", "logarithmic": "s2", "fast": "s3"}
NO_SCHEME = "-"


def setting_label(algorithm: str, neighborhood: str, scheme: str) -> str:
    """Short label such as ``sa/n1s3`` or ``lbs/n1``."""
    code = _NEIGHBORHOOD_CODES.get(neighborhood, neighborhood)
    if algorithm == "lbs" or scheme == NO_SCHEME:
        return f"{algorithm}/{code}"
    return f"{algorithm}/{code}{_SCHEME_CODES.get(scheme, scheme)}"


def parse_k_range(text: str) -> Tuple[int, ...]:
    """Parse ``a..b`` (inclusive) or ``a,b,c`` into sorted distinct sizes."""
    text = text.strip()
    try:
        if ".." in text:
            low, high = (int(part) for part in text.split("..", 1))
            values = range(low, high + 1)
        else:
            values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"k range must look like 1..45 or 4,8,16, got {text!r}")
    ks = tuple(sorted(set(values)))
    if not ks:
        raise ConfigError(f"k range {text!r} is empty")
    return ks


class SweepConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    data_dir: str
    algorithm: Literal["sa", "lbs"] = "sa"
    setting: Optional[str] = "n1s3"
    # Explicit pair, used when ``setting`` is None.
    neighborhood: Optional[NeighborhoodKind] = None
    scheme: Optional[Literal["geometric", "logarithmic", "fast"]] = None
    repeats: int = Field(default=10, ge=1)
    k_range: Optional[Tuple[int, ...]] = None
    seed: int = Field(default=0, ge=0)
    out: Optional[str] = None
    workers: int = Field(default=1, ge=1)
    timing: bool = True
    evaluator: EvaluatorConfig = EvaluatorConfig()
    annealer: AnnealerConfig = AnnealerConfig()
    beam: BeamConfig = BeamConfig()

    @model_validator(mode="after")
    def _check_setting(self) -> "SweepConfig":
        if self.setting is not None:
            if self.setting not in SETTINGS:
                raise ValueError(f"unknown setting {self.setting!r}; expected one of {', '.join(SETTINGS)}")
        elif self.neighborhood is None or (self.algorithm == "sa" and self.scheme is None):
            raise ValueError("without a setting name, give the neighborhood (and scheme for sa) explicitly")
        if self.k_range is not None and (not self.k_range or min(self.k_range) < 1):
            raise ValueError("k values must be >= 1")
        return self

    def resolved(self) -> Tuple[NeighborhoodKind, str]:
        """(neighborhood, scheme); scheme is ``-`` for beam search."""
        if self.setting is not None:
            neighborhood, scheme = SETTINGS[self.setting]
        else:
            neighborhood, scheme = self.neighborhood, self.scheme
        return neighborhood, scheme if self.algorithm == "sa" else NO_SCHEME

    @property
    def label(self) -> str:
        neighborhood, scheme = self.resolved()
        return setting_label(self.algorithm, neighborhood.value, scheme)

    def k_values(self, n: int) -> Tuple[int, ...]:
        ks = self.k_range if self.k_range is not None else tuple(range(1, n))
        if min(ks) < 1 or max(ks) > n - 1:
            raise ConfigError(f"k range {ks[0]}..{ks[-1]} must lie within 1..{n - 1}")
        return tuple(sorted(set(ks)))

    def annealer_for(self, seed: int) -> AnnealerConfig:
        neighborhood, scheme = self.resolved()
        values = self.annealer.model_dump()
        values.update(seed=seed, neighborhood=neighborhood)
        values["scheme"]["kind"] = scheme
        return AnnealerConfig.model_validate(values)

    def beam_for(self, seed: int) -> BeamConfig:
        neighborhood, _ = self.resolved()
        values = self.beam.model_dump()
        values.update(seed=seed, neighborhood=neighborhood, workers=1)
        return BeamConfig.model_validate(values)

    def digest(self) -> str:
        """Identity of everything that changes an individual run's outcome."""
        neighborhood, scheme = self.resolved()
        search = self.annealer if self.algorithm == "sa" else self.beam.model_copy(update={"workers": 1})
        payload = {
            "algorithm": self.algorithm,
            "neighborhood": neighborhood.value,
            "scheme": scheme,
            "seed": self.seed,
            "evaluator": self.evaluator.model_dump(mode="json"),
            "search": search.model_dump(mode="json", exclude={"seed"}),
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class SweepRow:
    k: int
    algorithm: str
    neighborhood: str
    scheme: str
    mean_guide: float
    stderr_guide: float
    mean_test_ndcg10: float
    mean_test_map: float
    best_subset_hex: str
    mean_wall_ms: Optional[float]
    repeats: int

    @property
    def label(self) -> str:
        return setting_label(self.algorithm, self.neighborhood, self.scheme)


class ResultStore:
    """Directory of RunRecord JSON files, one per (dataset, config, k, repeat)."""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)
        self._lock = threading.Lock()

    @staticmethod
    def key(dataset_digest: str, config_digest: str, k: int, repeat: int) -> str:
        return f"{dataset_digest[:12]}-{config_digest[:12]}-k{k}-r{repeat}"

    def _path(self, key: str) -> Path:
        if not key or "/" in key or "\\" in key or key.startswith("."):
            raise DataError(f"invalid run key {key!r}")
        return self.root / f"{key}.json"

    def load(self, key: str) -> Optional[RunRecord]:
        path = self._path(key)
        if not path.is_file():
            return None
        try:
            return RunRecord.model_validate_json(path.read_text(encoding="utf-8"))
        except (OSError, ValidationError) as e:
            raise DataError(f"corrupt run record {path}: {e}") from e

    def save(self, key: str, record: RunRecord) -> Path:
        path = self._path(key)
        with self._lock:
            self.root.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".json.tmp")
            tmp.write_text(record.model_dump_json(), encoding="utf-8")
            tmp.replace(path)
        return path

    def keys(self) -> List[str]:
        if not self.root.is_dir():
            return []
        return sorted(path.stem for path in self.root.glob("*.json"))

    def records(self, algorithm: Optional[str] = None, k: Optional[int] = None) -> List[Tuple[str, RunRecord]]:
        """Stored records in key order, optionally filtered."""
        found = []
        for key in self.keys():
            record = self.load(key)
            if record is None:
                continue
            if algorithm is not None and record.algorithm != algorithm:
                continue
            if k is not None and record.k != k:
                continue
            found.append((key, record))
        return found


def aggregate(
    records: Sequence[RunRecord], k: int, algorithm: str, neighborhood: str, scheme: str, timing: bool = True
) -> SweepRow:
    """One row from the repeats of one k, in repeat order.

    The standard error is the sample standard deviation over sqrt(repeats),
    0.0 for a single repeat. The reported subset is the best-scoring one,
    earliest repeat first on ties.
    """
    if not records:
        raise ValueError(f"no runs to aggregate for k={k}")
    guide = np.array([record.best_guide_score for record in records], dtype=np.float64)
    stderr = float(guide.std(ddof=1) / math.sqrt(guide.size)) if guide.size > 1 else 0.0
    best = max(range(len(records)), key=lambda i: (records[i].best_guide_score, -i))
    return SweepRow(
        k=k,
        algorithm=algorithm,
        neighborhood=neighborhood,
        scheme=scheme,
        mean_guide=float(guide.mean()),
        stderr_guide=stderr,
        mean_test_ndcg10=float(np.mean([r.best_test_report.get("ndcg@10", r.best_test_score) for r in records])),
        mean_test_map=float(np.mean([r.best_test_report.get("map", r.best_test_score) for r in records])),
        best_subset_hex=records[best].best_subset_hex,
        mean_wall_ms=float(np.mean([r.wall_ms for r in records])) if timing else None,
        repeats=len(records),
    )


def open_evaluator(
    data_dir: Union[str, Path], config: EvaluatorConfig, cache: Optional[ScoreCache] = None
) -> Tuple[SubsetEvaluator, str]:
    """Build the evaluator for a fold directory and return it with the dataset digest.

    The synthetic ranker only needs ``landscape.json``; the coordinate-ascent
    ranker loads train/vali/test.

    Raises:
        DataError: the directory lacks the files the ranker needs
    """
    data_dir = Path(data_dir)
    if config.ranker == "synthetic":
        landscape = read_landscape(data_dir)
        if landscape is None:
            raise DataError(f"{data_dir} has no landscape.json for the synthetic ranker")
        return EvaluatorFactory.create_evaluator(config, landscape=landscape, cache=cache), landscape.digest()
    splits = load_split_dir(data_dir)
    digest = digest_split_dir(data_dir)
    return EvaluatorFactory.create_evaluator(config, splits=splits, cache=cache, data_digest=digest), digest


def run_single(cfg: SweepConfig, evaluator: SubsetEvaluator, k: int, repeat: int) -> RunRecord:
    seed = derive_seed(cfg.seed, k, repeat)
    if cfg.algorithm == "sa":
        return anneal(k, evaluator, cfg.annealer_for(seed))
    return beam_search(k, evaluator, cfg.beam_for(seed))


def _rows_for(cfg: SweepConfig, ks: Sequence[int], records: Dict[Tuple[int, int], RunRecord]) -> List[SweepRow]:
    neighborhood, scheme = cfg.resolved()
    rows = []
    for k in ks:
        runs = [records.get((k, r)) for r in range(cfg.repeats)]
        if any(run is None for run in runs):
            continue
        rows.append(aggregate(runs, k, cfg.algorithm, neighborhood.value, scheme, timing=cfg.timing))
    return rows


def run_sweep(
    cfg: SweepConfig,
    store: Optional[ResultStore] = None,
    cache: Optional[ScoreCache] = None,
    evaluator: Optional[SubsetEvaluator] = None,
    dataset_digest: Optional[str] = None,
) -> List[SweepRow]:
    """Run every (k, repeat) cell, aggregate per k and write ``cfg.out`` when set.

    Cells already present in ``store`` are loaded instead of rerun. On
    KeyboardInterrupt the rows of fully finished k values are written
    before the interrupt propagates.
    """
    if evaluator is None:
        evaluator, dataset_digest = open_evaluator(cfg.data_dir, cfg.evaluator, cache)
    elif dataset_digest is None:
        dataset_digest = evaluator.digest
    ks = cfg.k_values(evaluator.n_features)
    config_digest = cfg.digest()

    records: Dict[Tuple[int, int], RunRecord] = {}
    pending = []
    for k in ks:
        for repeat in range(cfg.repeats):
            stored = store.load(ResultStore.key(dataset_digest, config_digest, k, repeat)) if store else None
            if stored is not None:
                records[(k, repeat)] = stored
            else:
                pending.append((k, repeat))
    logger.info(
        "sweep %s ks=%d repeats=%d resumed=%d pending=%d workers=%d",
        cfg.label, len(ks), cfg.repeats, len(records), len(pending), cfg.workers,
    )

    executor = ThreadPoolExecutor(max_workers=cfg.workers)
    try:
        futures = {executor.submit(run_single, cfg, evaluator, k, r): (k, r) for k, r in pending}
        for done, future in enumerate(as_completed(futures), start=1):
            k, repeat = futures[future]
            record = future.result()
            records[(k, repeat)] = record
            if store is not None:
                store.save(ResultStore.key(dataset_digest, config_digest, k, repeat), record)
            logger.info("sweep progress %d/%d k=%d repeat=%d best=%.6f", done, len(pending), k, repeat, record.best_guide_score)
    except KeyboardInterrupt:
        executor.shutdown(wait=False, cancel_futures=True)
        rows = _rows_for(cfg, ks, records)
        if cfg.out:
            write_sweep_csv(rows, cfg.out, timing=cfg.timing)
        logger.warning("sweep interrupted; wrote %d complete rows", len(rows))
        raise
    executor.shutdown(wait=True)

    rows = _rows_for(cfg, ks, records)
    if cfg.out:
        write_sweep_csv(rows, cfg.out, timing=cfg.timing)
    return rows


def _format_float(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


def format_sweep_csv(rows: Sequence[SweepRow], timing: bool = True) -> str:
    buffer = io.StringIO()
    buffer.write(SWEEP_HEADER + "\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for row in sorted(rows, key=lambda r: r.k):
        writer.writerow(
            [
                row.k,
                row.algorithm,
                row.neighborhood,
                row.scheme,
                _format_float(row.mean_guide),
                _format_float(row.stderr_guide),
                _format_float(row.mean_test_ndcg10),
                _format_float(row.mean_test_map),
                row.best_subset_hex,
                _format_float(row.mean_wall_ms if timing else None),
                row.repeats,
            ]
        )
    return buffer.getvalue()


def write_sweep_csv(rows: Sequence[SweepRow], path: Union[str, Path], timing: bool = True) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_sweep_csv(rows, timing=timing), encoding="utf-8")
    return path


def read_sweep_csv(path: Union[str, Path]) -> List[SweepRow]:
    """Read a file written by ``write_sweep_csv``.

    Raises:
        DataError: missing version header, unexpected columns or bad values
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise DataError(f"cannot read sweep file {path}: {e}") from e
    if not lines or lines[0].strip() != SWEEP_HEADER:
        raise DataError(f"{path} is not a rank-anneal sweep file (expected {SWEEP_HEADER!r})")
    reader = csv.DictReader(lines[1:])
    if tuple(reader.fieldnames or ()) != SWEEP_COLUMNS:
        raise DataError(f"{path} has columns {reader.fieldnames}, expected {list(SWEEP_COLUMNS)}")
    rows = []
    try:
        for record in reader:
            rows.append(
                SweepRow(
                    k=int(record["k"]),
                    algorithm=record["algorithm"],
                    neighborhood=record["neighborhood"],
                    scheme=record["scheme"],
                    mean_guide=float(record["mean_guide"]),
                    stderr_guide=float(record["stderr_guide"]),
                    mean_test_ndcg10=float(record["mean_test_ndcg10"]),
                    mean_test_map=float(record["mean_test_map"]),
                    best_subset_hex=record["best_subset_hex"],
                    mean_wall_ms=float(record["mean_wall_ms"]) if record["mean_wall_ms"] else None,
                    repeats=int(record["repeats"]),
                )
            )
    except (TypeError, ValueError) as e:
        raise DataError(f"bad value in {path} line {reader.line_num + 1}: {e}") from e
    return rows


@dataclass(frozen=True)
class Comparison:
    labels: Tuple[str, ...]
    ks: Tuple[int, ...]
    rows: Dict[str, Dict[int, SweepRow]]

    def total_wall_ms(self, label: str) -> Optional[float]:
        """Summed wall time of every run of a setting; None when timing was suppressed."""
        values = [row.mean_wall_ms * row.repeats for row in self.rows[label].values() if row.mean_wall_ms is not None]
        if len(values) != len(self.rows[label]):
            return None
        return float(sum(values))


def compare_settings(sweeps: Sequence[Sequence[SweepRow]]) -> Comparison:
    """Line up two or more sweeps over the same k values.

    Raises:
        ConfigError: fewer than two sweeps, a sweep mixing settings, a
            setting given twice, or k values that differ between sweeps
    """
    if len(sweeps) < 2:
        raise ConfigError(f"compare needs at least 2 sweeps, got {len(sweeps)}")
    labels: List[str] = []
    grid: Dict[str, Dict[int, SweepRow]] = {}
    ks: Optional[Tuple[int, ...]] = None
    for rows in sweeps:
        if not rows:
            raise ConfigError("cannot compare an empty sweep")
        sweep_labels = {row.label for row in rows}
        if len(sweep_labels) != 1:
            raise ConfigError(f"a sweep must hold one setting, found {sorted(sweep_labels)}")
        label = sweep_labels.pop()
        if label in grid:
            raise ConfigError(f"setting {label} appears in more than one sweep")
        sweep_ks = tuple(sorted(row.k for row in rows))
        if ks is None:
            ks = sweep_ks
        elif sweep_ks != ks:
            raise ConfigError(f"mismatched k ranges: {label} covers {list(sweep_ks)}, expected {list(ks)}")
        labels.append(label)
        grid[label] = {row.k: row for row in rows}
    return Comparison(labels=tuple(labels), ks=ks, rows=grid)


def write_comparison(comparison: Comparison, out: Union[str, Path]) -> Tuple[Path, Path, Path]:
    """Write the wide grid to ``out`` plus ``<stem>.long.csv`` and ``<stem>.timing.csv``."""
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    long_path = out.with_name(f"{out.stem}.long.csv")
    timing_path = out.with_name(f"{out.stem}.timing.csv")

    with out.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["k", *comparison.labels])
        for k in comparison.ks:
            writer.writerow([k, *(repr(comparison.rows[label][k].mean_guide) for label in comparison.labels)])

    with long_path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["setting", "k", "mean_guide", "stderr_guide", "mean_test_ndcg10", "mean_test_map"])
        for label in comparison.labels:
            for k in comparison.ks:
                row = comparison.rows[label][k]
                writer.writerow(
                    [label, k, repr(row.mean_guide), repr(row.stderr_guide), repr(row.mean_test_ndcg10), repr(row.mean_test_map)]
                )

    with timing_path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["setting", "total_wall_ms"])
        for label in comparison.labels:
            writer.writerow([label, _format_float(comparison.total_wall_ms(label))])

    logger.info("comparison of %d settings over %d k values written to %s", len(comparison.labels), len(comparison.ks), out)
    return out, long_path, timing_path


def success_rates(
    landscape: SyntheticLandscape,
    k: int,
    seeds: Sequence[int],
    annealer: AnnealerConfig,
    beam: BeamConfig,
    out: Optional[Union[str, Path]] = None,
) -> Dict[str, float]:
    """Fraction of seeded runs per algorithm that reach the exhaustive optimum of ``landscape``.

    Both algorithms share one evaluation budget: the annealer's, with the
    beam running ``ceil(budget / q)`` steps.
    """
    optimum, _ = brute_force_optimum(landscape, k)
    config = EvaluatorConfig(ranker="synthetic")
    evaluator = EvaluatorFactory.create_evaluator(config, landscape=landscape)
    if not seeds:
        raise ConfigError("success rates need at least one seed")
    budget = annealer.budget or default_budget(landscape.n, k, annealer.budget_factor, annealer.budget_cap)
    steps = math.ceil(budget / beam.beam_width)

    hits = {"sa": 0, "lbs": 0}
    for seed in seeds:
        sa_run = anneal(k, evaluator, annealer.model_copy(update={"seed": seed, "budget": budget}))
        lbs_run = beam_search(k, evaluator, beam.model_copy(update={"seed": seed, "steps": steps}))
        hits["sa"] += sa_run.best_guide_score == optimum
        hits["lbs"] += lbs_run.best_guide_score == optimum
    rates = {name: count / len(seeds) for name, count in hits.items()}

    if out is not None:
        with Path(out).open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["algorithm", "successes", "runs", "success_rate", "budget"])
            for name in ("sa", "lbs"):
                writer.writerow([name, hits[name], len(seeds), repr(rates[name]), budget])
    return rates
