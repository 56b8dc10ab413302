"""``rank-anneal`` command line.

Option precedence: built-in defaults < environment (.env) < ``--config``
file < command-line flags. Exit codes: 0 success, 1 configuration or usage
error, 2 data error.
"""

import json
import logging
import sys
from typing import Any, Dict, List, Optional

import click
from pydantic import ValidationError

from rank_anneal.config import ConfigManager, build_model, configure_logging, load_config_file
from rank_anneal.errors import ConfigError, RankAnnealError
from rank_anneal.evaluator import EvaluatorConfig, EvaluatorFactory
from rank_anneal.experiment import (
    SETTINGS,
    ResultStore,
    SweepConfig,
    compare_settings,
    open_evaluator,
    parse_k_range,
    read_sweep_csv,
    run_sweep,
    write_comparison,
)
from rank_anneal.subset import FeatureSubset
from rank_anneal.synthetic import make_synthetic, write_synthetic

logger = logging.getLogger(__name__)

_EVALUATOR_FLAGS = ("guide_metric", "guide_split", "ranker", "skip_empty_queries")


def _nested(values: Dict[str, Any], section: str) -> Dict[str, Any]:
    table = values.get(section)
    if table is None:
        table = values[section] = {}
    if not isinstance(table, dict):
        raise ConfigError(f"config section {section!r} must be a table")
    return table


def _apply(values: Dict[str, Any], section: Optional[str], **flags: Any) -> None:
    """Copy flags that were given (not None) into ``values`` or one of its sections."""
    target = values if section is None else _nested(values, section)
    for name, value in flags.items():
        if value is not None:
            target[name] = value


def _file_values(config_path: Optional[str]) -> Dict[str, Any]:
    values = load_config_file(config_path) if config_path else {}
    if isinstance(values.get("k_range"), str):
        values["k_range"] = parse_k_range(values["k_range"])
    if "data" in values and "data_dir" not in values:
        values["data_dir"] = values.pop("data")
    return values


@click.group()
@click.option("--log-level", default=None, help="Override RANK_ANNEAL_LOG_LEVEL.")
@click.pass_context
def cli(ctx: click.Context, log_level: Optional[str]):
    """Simulated-annealing feature selection for learning-to-rank."""
    config_manager = ConfigManager()
    configure_logging(log_level or config_manager.log_level)
    ctx.obj = config_manager


@cli.command()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="JSON or TOML file of sweep options.")
@click.option("--data", "data_dir", type=click.Path(file_okay=False), help="LETOR fold directory.")
@click.option("--algo", "algorithm", type=click.Choice(["sa", "lbs"]))
@click.option("--setting", type=click.Choice(sorted(SETTINGS)))
@click.option("--neighborhood", type=click.Choice(["swap", "insertion"]))
@click.option("--scheme", type=click.Choice(["geometric", "logarithmic", "fast"]))
@click.option("--repeats", type=int)
@click.option("--k", "k_text", help="Subset sizes, e.g. 1..45 or 4,8,16.")
@click.option("--seed", type=int)
@click.option("--out", type=click.Path(dir_okay=False))
@click.option("--workers", type=int, help="Concurrent (k, repeat) runs.")
@click.option("--no-timing", is_flag=True, help="Leave mean_wall_ms empty for byte-stable output.")
@click.option("--guide-metric")
@click.option("--guide-split", type=click.Choice(["validation", "test"]))
@click.option("--ranker", type=click.Choice(["coordinate_ascent", "synthetic"]))
@click.option("--skip-empty-queries", is_flag=True)
@click.option("--t0", "t_initial", type=float, help="Initial temperature T0.")
@click.option("--alpha", type=float)
@click.option("--budget", type=int)
@click.option("--budget-factor", type=float)
@click.option("--accept-quota", type=int)
@click.option("--max-steps-per-temp", type=int)
@click.option("--progress-threshold", type=int)
@click.option("--no-progress", is_flag=True, help="Disable restarts from the best state.")
@click.option("--t-min", type=float)
@click.option("--hill-climbing", is_flag=True)
@click.option("--calibrate", is_flag=True)
@click.option("--beam-width", type=int)
@click.option("--expand-all", is_flag=True)
@click.option("--store", "store_dir", type=click.Path(file_okay=False), help="Run record directory.")
@click.option("--no-store", is_flag=True, help="Neither read nor write run records.")
@click.pass_obj
def sweep(config_manager: ConfigManager, config_path, k_text, no_timing, no_progress, store_dir, no_store, **flags):
    """Run a search for every k and repeat, and write one CSV row per k."""
    values = _file_values(config_path)
    values.setdefault("workers", config_manager.workers)
    _apply(
        values,
        None,
        data_dir=flags["data_dir"],
        algorithm=flags["algorithm"],
        setting=flags["setting"],
        neighborhood=flags["neighborhood"],
        scheme=flags["scheme"],
        repeats=flags["repeats"],
        seed=flags["seed"],
        out=flags["out"],
        workers=flags["workers"],
        k_range=parse_k_range(k_text) if k_text else None,
        timing=False if no_timing else None,
    )
    if flags["neighborhood"] is not None and flags["setting"] is None:
        values["setting"] = None
    _apply(values, "evaluator", **{name: flags[name] or None for name in _EVALUATOR_FLAGS})
    _apply(
        values,
        "annealer",
        budget=flags["budget"],
        budget_factor=flags["budget_factor"],
        accept_quota=flags["accept_quota"],
        max_steps_per_temp=flags["max_steps_per_temp"],
        progress_threshold=flags["progress_threshold"],
        t_min=flags["t_min"],
        hill_climbing=flags["hill_climbing"] or None,
        calibrate=flags["calibrate"] or None,
    )
    if no_progress:
        values["annealer"]["progress_threshold"] = None
    _apply(values["annealer"], "scheme", t_initial=flags["t_initial"], alpha=flags["alpha"])
    _apply(values, "beam", beam_width=flags["beam_width"], expand_all=flags["expand_all"] or None, budget_factor=flags["budget_factor"])
    if "data_dir" not in values:
        raise click.UsageError("--data is required (or data_dir in the config file)")

    cfg = build_model(SweepConfig, values)
    store = None if no_store else ResultStore(store_dir or config_manager.store_dir)
    cache = EvaluatorFactory.create_cache(config_manager)
    try:
        rows = run_sweep(cfg, store=store, cache=cache)
    finally:
        if config_manager.cache_file:
            cache.save(config_manager.cache_file)

    for row in rows:
        click.echo(f"k={row.k:<3d} {row.label:<9s} mean={row.mean_guide:.4f} stderr={row.stderr_guide:.4f} best={row.best_subset_hex}")
    if cfg.out:
        click.echo(f"wrote {len(rows)} rows to {cfg.out}")


@cli.command()
@click.option("--n", "n_features", type=int, required=True, help="Number of features.")
@click.option("--queries", type=int, required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--planted", help="1-based informative features, e.g. 1,2,3,4.")
@click.option("--out", type=click.Path(file_okay=False), required=True)
def synth(n_features: int, queries: int, seed: int, planted: Optional[str], out: str):
    """Generate a synthetic LETOR fold with a planted informative subset."""
    planted_indices = None
    if planted:
        try:
            planted_indices = [int(part) - 1 for part in planted.split(",") if part.strip()]
        except ValueError:
            raise click.BadParameter(f"expected comma-separated feature ids, got {planted!r}", param_hint="--planted")
    train, validation, test, landscape = make_synthetic(n_features, queries, seed, planted=planted_indices)
    path = write_synthetic(out, (train, validation, test), landscape)
    click.echo(f"wrote synthetic fold n={n_features} queries={queries} planted={[p + 1 for p in landscape.planted]} to {path}")


@cli.command(name="eval")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="JSON or TOML file with an evaluator table.")
@click.option("--data", "data_dir", type=click.Path(file_okay=False), required=True)
@click.option("--subset", "subset_hex", required=True, help="MSB-first hex bit pattern.")
@click.option("--guide-metric")
@click.option("--guide-split", type=click.Choice(["validation", "test"]))
@click.option("--ranker", type=click.Choice(["coordinate_ascent", "synthetic"]))
@click.option("--skip-empty-queries", is_flag=True)
@click.option("--seed", type=int)
@click.pass_obj
def evaluate(config_manager: ConfigManager, config_path, data_dir, subset_hex, seed, **flags):
    """Score one feature subset and print its score card as JSON."""
    values = dict(_file_values(config_path).get("evaluator", {}))
    _apply(values, None, seed=seed, **{name: value or None for name, value in flags.items()})
    config = build_model(EvaluatorConfig, values)
    cache = EvaluatorFactory.create_cache(config_manager)
    evaluator, _ = open_evaluator(data_dir, config, cache)
    subset = FeatureSubset.from_hex(subset_hex, evaluator.n_features)
    card = evaluator.evaluate(subset)
    if config_manager.cache_file:
        cache.save(config_manager.cache_file)
    payload = card.to_dict()
    payload.pop("per_query")
    payload["subset"] = subset.to_hex()
    payload["features"] = [int(i) + 1 for i in subset.indices()]
    click.echo(json.dumps(payload, sort_keys=True))


@cli.command()
@click.argument("sweeps", nargs=-1, type=click.Path(dir_okay=False, exists=True))
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def compare(sweeps, out: str):
    """Line up sweep CSVs into a k-by-setting grid plus long and timing files."""
    comparison = compare_settings([read_sweep_csv(path) for path in sweeps])
    paths = write_comparison(comparison, out)
    for label in comparison.labels:
        total = comparison.total_wall_ms(label)
        click.echo(f"{label:<9s} total_wall_ms={'n/a' if total is None else f'{total:.1f}'}")
    click.echo("wrote " + ", ".join(str(path) for path in paths))


@cli.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, type=int, show_default=True)
def serve(host: str, port: int):
    """Serve stored run records and subset scoring over HTTP."""
    import uvicorn

    uvicorn.run("rank_anneal.main:router", host=host, port=port)


def main(argv: Optional[List[str]] = None) -> int:
    """Console entry point; returns the process exit code."""
    try:
        result = cli.main(args=argv, prog_name="rank-anneal", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("interrupted", err=True)
        return 130
    except click.ClickException as e:
        e.show()
        return 1
    except ValidationError as e:
        click.echo(f"error: {e}", err=True)
        return 1
    except RankAnnealError as e:
        click.echo(f"error: {e}", err=True)
        return e.exit_code
    return result if isinstance(result, int) else 0


if __name__ == "__main__":
    sys.exit(main())
