import json
import sys
from functools import lru_cache
from itertools import cycle
from pathlib import Path
from typing import Callable, Dict, List, Optional

import click
import numpy as np
from click.core import Group
from pydantic import ValidationError
from rich import box
from rich.console import Console
from rich.table import Table

from rrwmean import logger

from .common import (
    InfeasibleTargetError,
    ModelConfigError,
    RRWError,
    SolverConvergenceError,
    fmt,
)
from .config import Config, config
from .dp_oracle import DpGrid, compare
from .export import (
    RunManifest,
    compare_record,
    curve_csv,
    dp_record,
    extreme_path_csv,
    outcome_record,
    path_record,
    render_path,
    tail_csv,
    to_json,
    transitions_csv,
)
from .increments import IncrementModel, model_from_json
from .mc_engine import SimConfig, compare_extreme_to_theory, pilot_mean, run, tail_asymmetry_report
from .mlp_solver import rate_curve, solve_path
from .runs import record_run, run_history

EXIT_CONFIG = 1
EXIT_INFEASIBLE = 2
EXIT_CONVERGENCE = 3


def _error_kind(error: Exception):
    if isinstance(error, InfeasibleTargetError):
        return "infeasible", EXIT_INFEASIBLE
    if isinstance(error, SolverConvergenceError):
        return "convergence", EXIT_CONVERGENCE
    if isinstance(error, click.UsageError):
        return "usage", EXIT_CONFIG
    return "config", EXIT_CONFIG


def _fail(error: Exception) -> int:
    kind, code = _error_kind(error)
    message = error.format_message() if isinstance(error, click.ClickException) else str(error)
    click.echo(f"error: {kind}: {' '.join(message.split())}", err=True)
    return code


class RRWGroup(Group):
    """Maps package errors to a one-line message and the documented exit codes."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except (RRWError, ValidationError, click.UsageError) as e:
            if isinstance(e, ValidationError):
                e = ModelConfigError(str(e))
            ctx.exit(_fail(e))


cli = RRWGroup("rrw")


class ModelParam(click.ParamType):
    """Inline JSON object or the path of a JSON file."""

    name = "model"

    def convert(self, value, param, ctx) -> IncrementModel:
        if isinstance(value, IncrementModel):
            return value
        text = value
        if not value.lstrip().startswith("{"):
            path = Path(value)
            if not path.is_file():
                raise ModelConfigError(f"model {value!r} is neither a JSON object nor a file.")
            text = path.read_text()
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as e:
            raise ModelConfigError(f"invalid model JSON: {e}") from e
        return model_from_json(obj)


MODEL = ModelParam()


def resolve_seed(seed: int) -> int:
    """RRW_SEED, when set, overrides the --seed flag."""
    env_seed = Config().seed
    if env_seed is not None:
        logger.info("Using seed %s from RRW_SEED (flag value %s ignored)", env_seed, seed)
        return env_seed
    return seed


def _int_list(value: str) -> List[int]:
    try:
        return [int(v) for v in value.split(",") if v.strip()]
    except ValueError as e:
        raise click.BadParameter(f"expected comma-separated integers, got {value!r}") from e


def _float_list(value: str) -> List[float]:
    try:
        return [float(v) for v in value.split(",") if v.strip()]
    except ValueError as e:
        raise click.BadParameter(f"expected comma-separated numbers, got {value!r}") from e


def _write_outputs(
    recorder,
    command: str,
    echo: Dict,
    out_dir: Path,
    files: Dict[str, Callable[[str], str]],
    seed: Optional[int] = None,
) -> RunManifest:
    """Write ``files`` (name -> renderer taking the manifest hash) and manifest.json."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(command=command, config=echo, seed=seed, outputs=list(files))
    manifest_hash = manifest.manifest_hash
    for name, render in files.items():
        (out_dir / name).write_text(render(manifest_hash))
        click.echo(f"wrote {out_dir / name}")
    manifest.write(out_dir)
    recorder.manifest_hash = manifest_hash
    recorder.seed = seed
    return manifest


@cli.command
@click.argument("model", type=MODEL)
@click.option("--z", type=float, required=True, help="Target area of the scaled path.")
@click.option("--samples", type=click.IntRange(min=2), default=201, help="Uniform sample points on [0, 1].")
@click.option(
    "-o",
    "--out",
    type=click.Path(dir_okay=False, path_type=Path),
    help="Output file (.json or .csv). CSV is printed to stdout when omitted.",
)
def path(model: IncrementModel, z: float, samples: int, out: Optional[Path]):
    """Most likely path for target area Z."""
    echo = {"model": model.to_json(), "z": z, "samples": samples}
    with record_run("path", echo) as recorder:
        record = path_record(solve_path(model, z), samples)
        if out is None:
            click.echo(render_path(record, None), nl=False)
            return
        _write_outputs(recorder, "path", echo, out.parent, {out.name: lambda h: render_path(record, out, h)})
        click.echo(f"rate={fmt(record['rate'])} lambda_star={fmt(record['lambda_star'])}")


@cli.command(name="rate-curve")
@click.argument("model", type=MODEL)
@click.option("--z-min", type=click.FloatRange(min=0), default=0.0)
@click.option("--z-max", type=click.FloatRange(min=0), required=True)
@click.option("--points", type=click.IntRange(min=2), default=51)
@click.option(
    "-o",
    "--out",
    type=click.Path(dir_okay=False, path_type=Path),
    help="Curve CSV; transitions go to <stem>_transitions.csv. Printed to stdout when omitted.",
)
@click.option("-w", "--workers", type=click.IntRange(min=1), default=config.workers)
def rate_curve_cmd(model, z_min, z_max, points, out, workers):
    """Rate function over an evenly spaced grid of target areas."""
    if z_max <= z_min:
        raise click.BadParameter("--z-max must exceed --z-min")
    echo = {"model": model.to_json(), "z_min": z_min, "z_max": z_max, "points": points}
    with record_run("rate-curve", echo) as recorder:
        curve = rate_curve(model, np.linspace(z_min, z_max, points), workers=workers)
        for tr in curve.transitions:
            click.echo(
                f"transition {tr.kind}: z in [{fmt(tr.z_lo)}, {fmt(tr.z_hi)}] ~ {fmt(tr.z_est)}",
                err=True,
            )
        if out is None:
            click.echo(curve_csv(curve), nl=False)
            return
        _write_outputs(
            recorder,
            "rate-curve",
            echo,
            out.parent,
            {
                out.name: lambda h: curve_csv(curve, h),
                f"{out.stem}_transitions.csv": lambda h: transitions_csv(curve, h),
            },
        )


@cli.command
@click.argument("model", type=MODEL)
@click.option("--n", "n", type=click.IntRange(min=1), required=True, help="Horizon in steps.")
@click.option("--reps", type=click.IntRange(min=1), default=1_000_000, help="Replications.")
@click.option("--seed", type=click.IntRange(min=0), default=0)
@click.option("--thresholds", default="", help="Comma-separated tail thresholds r.")
@click.option("--keep-extreme", is_flag=True, help="Keep and compare the extreme-mean trajectory.")
@click.option("--exhaustive", is_flag=True, help="Enumerate all 2^n sequences (bernoulli, n <= 20).")
@click.option("--reservoir", type=click.IntRange(min=0), default=0, help="W̄_n samples to keep.")
@click.option("--out-dir", type=click.Path(file_okay=False, path_type=Path), required=True)
@click.option("-w", "--workers", type=click.IntRange(min=1), default=config.workers)
def simulate(model, n, reps, seed, thresholds, keep_extreme, exhaustive, reservoir, out_dir, workers):
    """Simulate the reflected walk and count tail events of its mean."""
    seed = resolve_seed(seed)
    cfg = SimConfig(
        model=model,
        n=n,
        replications=reps,
        seed=seed,
        thresholds=_float_list(thresholds),
        keep_extreme=keep_extreme,
        exhaustive=exhaustive,
        reservoir=reservoir,
    )
    echo = {
        "model": model.to_json(),
        "n": n,
        "reps": reps,
        "thresholds": cfg.thresholds,
        "keep_extreme": keep_extreme,
        "exhaustive": exhaustive,
        "reservoir": reservoir,
        "block_size": cfg.block_size,
    }
    with record_run("simulate", {**echo, "seed": seed}) as recorder:
        outcome = run(cfg, workers=workers)
        comparison = None
        if keep_extreme:
            try:
                comparison = compare_extreme_to_theory(outcome, model)
            except InfeasibleTargetError as e:
                logger.warning("Skipping the extreme-path comparison: %s", e)
        files = {"summary.json": lambda h: to_json(outcome_record(outcome, comparison), h)}
        if keep_extreme:
            files["extreme_path.csv"] = lambda h: extreme_path_csv(outcome, h)
        _write_outputs(recorder, "simulate", echo, out_dir, files, seed=seed)


@cli.command
@click.argument("model", type=MODEL)
@click.option("--r-low", type=float, help="Lower threshold (default: 0.2 x pilot mean).")
@click.option("--r-high", type=float, help="Upper threshold (default: 2 x pilot mean).")
@click.option("--n-list", default="20,40,80", help="Comma-separated horizons.")
@click.option("--reps", type=click.IntRange(min=1), default=1_000_000)
@click.option("--seed", type=click.IntRange(min=0), default=0)
@click.option("--pilot-steps", type=click.IntRange(min=1000), default=1_000_000)
@click.option("--out-dir", type=click.Path(file_okay=False, path_type=Path), required=True)
@click.option("-w", "--workers", type=click.IntRange(min=1), default=config.workers)
def tails(model, r_low, r_high, n_list, reps, seed, pilot_steps, out_dir, workers):
    """Lower and upper tail frequencies of the sample mean for several horizons."""
    seed = resolve_seed(seed)
    n_values = _int_list(n_list)
    echo = {"model": model.to_json(), "n_list": n_values, "reps": reps, "pilot_steps": pilot_steps}
    with record_run("tails", {**echo, "seed": seed}) as recorder:
        pilot = pilot_mean(model, steps=pilot_steps, seed=seed)
        r_low = 0.2 * pilot[0] if r_low is None else r_low
        r_high = 2 * pilot[0] if r_high is None else r_high
        echo.update(r_low=r_low, r_high=r_high)
        report = tail_asymmetry_report(
            model, r_low, r_high, n_values, reps, seed=seed, workers=workers, pilot=pilot
        )
        _write_outputs(recorder, "tails", echo, out_dir, {"tails.csv": lambda h: tail_csv(report, h)}, seed=seed)
        click.echo(f"pilot_mean={fmt(report.pilot_mean)} stderr={fmt(report.pilot_stderr)}")


@cli.command
@click.argument("model", type=MODEL)
@click.option("--z", type=click.FloatRange(min=0), required=True)
@click.option("--grid", "grid_spec", default="200,200,400", help="n_t,n_h,n_a")
@click.option("--h-max", type=click.FloatRange(min=0, min_open=True))
@click.option("--a-max", type=click.FloatRange(min=0, min_open=True))
@click.option("--span", type=click.IntRange(min=1, max=16), default=4, help="Longest straight segment, in time steps.")
@click.option(
    "-o",
    "--out",
    type=click.Path(dir_okay=False, path_type=Path),
    help="Also write the lattice path (.json or .csv).",
)
@click.option("-w", "--workers", type=click.IntRange(min=1), default=config.workers)
def verify(model, z, grid_spec, h_max, a_max, span, out, workers):
    """Compare the analytic rate with the lattice oracle."""
    counts = _int_list(grid_spec)
    if len(counts) != 3:
        raise click.BadParameter("--grid takes three integers n_t,n_h,n_a")
    n_t, n_h, n_a = counts
    grid = DpGrid.for_target(model, z, n_t=n_t, n_h=n_h, n_a=n_a, h_max=h_max, a_max=a_max, span=span)
    echo = {"model": model.to_json(), "z": z, "grid": grid.model_dump()}
    with record_run("verify", echo) as recorder:
        report = compare(model, z, grid, workers=workers)
        click.echo(to_json(compare_record(model, report)), nl=False)
        if out is not None:
            record = dp_record(model, report.solution)
            _write_outputs(recorder, "verify", echo, out.parent, {out.name: lambda h: render_path(record, out, h)})


def table_column_colors():
    colors_gen = cycle(["cyan", "light_steel_blue", "orchid", "magenta", "dodger_blue1"])

    @lru_cache
    def column_color(col_name: str) -> str:
        return next(colors_gen)

    return column_color


@cli.command
@click.option("-l", "--limit", type=int, default=10, help="Number of most recent runs to show.")
@click.option("-m", "--match", help="Only show runs of commands matching this text.")
def history(limit: int, match: Optional[str] = None):
    """Print run history to console display."""
    rows = run_history(limit=limit, match=match)
    columns = ["run_id", "command", "started", "finished", "status", "seed", "manifest_hash"]
    column_color = table_column_colors()
    table = Table(title="Run History", box=box.SIMPLE)
    for c in columns:
        table.add_column(c.replace("_", " ").title(), style=column_color(c), justify="center")
    for row in rows:
        table.add_row(*["" if row[c] is None else str(row[c]) for c in columns])
    Console().print(table, justify="center")


def main(argv: Optional[List[str]] = None):
    try:
        code = cli.main(args=argv, prog_name="rrw", standalone_mode=False)
    except click.exceptions.Exit as e:
        code = e.exit_code
    except click.exceptions.Abort:
        code = EXIT_CONFIG
    except (click.ClickException, RRWError) as e:
        code = _fail(e)
    sys.exit(code if isinstance(code, int) else 0)
