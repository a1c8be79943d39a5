"""Command line driver.

Exit codes: 0 success, 1 invariant violation, 2 usage or configuration error.
Every output embeds the package version, the validated configuration and the
seed.
"""

from __future__ import annotations

import csv
import io
import json
import sys
import warnings
from pathlib import Path

import click
import numpy as np

from . import __version__, games, sim
from .estimates import CHECKS, EstimateGrid, validate_estimates
from .numerics import check_round_param
from .protocol import (
    AbortAt,
    HonestSchedule,
    InvariantError,
    RoundLabel,
    run_cleve_majority,
    run_three_party_wrapped,
    run_two_party_wrapped,
)

PARTIES = {"pi2": 2, "pi3": 3, "cleve": 2}


class ConfigError(click.UsageError):
    pass


def _check_m(m: int, allow_any: bool) -> None:
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            check_round_param(m, strict=not allow_any)
    except ValueError as e:
        raise ConfigError(str(e).replace("pass strict=False", "use --allow-any-m")) from e


def _parse_ints(text: str, what: str) -> list[int]:
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError as e:
        raise ConfigError(f"malformed {what}: {text!r}") from e
    return vals


def _parse_range(text: str, what: str) -> list[int]:
    """``lo:hi[:step]`` (inclusive) or a comma list."""
    if ":" not in text:
        return _parse_ints(text, what)
    parts = text.split(":")
    try:
        lo, hi, *rest = (int(p) for p in parts)
    except ValueError as e:
        raise ConfigError(f"malformed {what}: {text!r}") from e
    step = rest[0] if rest else 1
    if len(parts) > 3 or step < 1 or hi < lo:
        raise ConfigError(f"malformed {what}: {text!r}")
    return list(range(lo, hi + 1, step))


def _corrupt(text: str | None, protocol: str, adversary: str) -> frozenset[int]:
    if text is None:
        if adversary == "none":
            return frozenset()
        return frozenset({0, 1}) if protocol == "pi3" and adversary == "optimal" else frozenset({0})
    ids = frozenset(_parse_ints(text, "corrupt set"))
    if not ids < frozenset(range(PARTIES[protocol])):
        raise ConfigError("corrupt set must be a strict subset of the parties")
    return ids


def make_schedule(protocol: str, m: int, adversary: str, corrupt: frozenset[int]):
    """Build the fail-stop schedule named by ``adversary``."""
    if adversary == "none":
        return HonestSchedule()
    if adversary == "optimal":
        if protocol == "cleve":
            return sim.greedy_adversary("cleve", 1, corrupt)
        try:
            return sim.optimal_adversary(protocol, m, corrupt)
        except ValueError as e:
            raise ConfigError(str(e)) from e
    if adversary.startswith("greedy:"):
        d = adversary.split(":", 1)[1]
        if d not in ("0", "1"):
            raise ConfigError(f"greedy direction must be 0 or 1, got {d!r}")
        return sim.greedy_adversary(protocol, int(d), corrupt)
    if adversary.startswith("abort-at:"):
        spec = adversary.split(":", 1)[1]
        try:
            label = str(RoundLabel.make("out", int(spec), "a")) if spec.isdigit() else str(RoundLabel.parse(spec))
        except (ValueError, KeyError) as e:
            raise ConfigError(f"malformed abort round {spec!r}") from e
        if not corrupt:
            raise ConfigError("abort-at needs a corrupt party")
        return AbortAt({label: set(corrupt)}, corrupt)
    raise ConfigError(f"unknown adversary {adversary!r}")


def _header(config: dict, seed) -> dict:
    return {"version": __version__, "config": config, "seed": seed}


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text, nl=False)


def _csv_text(meta: dict, columns: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    for key in ("version", "config", "seed"):
        buf.write(f"# {key}={json.dumps(meta[key], sort_keys=True)}\n")
    w = csv.DictWriter(buf, columns, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


@click.group()
@click.version_option(__version__, prog_name="fairflip")
def cli() -> None:
    """Simulate fair coin-flipping protocols and measure adversarial bias."""


@cli.command()
@click.option("--protocol", type=click.Choice(["pi2", "pi3", "cleve"]), required=True)
@click.option("--m", "m", type=int, required=True)
@click.option("--adversary", default="none", show_default=True)
@click.option("--corrupt", default=None, help="comma-separated party ids")
@click.option("--trials", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--strict/--allow-any-m", default=True, help="require m congruent to 1 mod 4")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def simulate(protocol, m, adversary, corrupt, trials, seed, strict, out):
    """Run protocol executions and write their transcripts as JSON."""
    _check_m(m, not strict)
    cset = _corrupt(corrupt, protocol, adversary)
    schedule = make_schedule(protocol, m, adversary, cset)
    config = {"subcommand": "simulate", "protocol": protocol, "m": m, "adversary": adversary,
              "corrupt": sorted(cset), "trials": trials, "strict": strict}
    runner = {"pi2": run_two_party_wrapped, "pi3": run_three_party_wrapped, "cleve": run_cleve_majority}[protocol]
    transcripts = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for t in range(trials):
            tr = runner(m, schedule, rng=np.random.default_rng([seed, t]), seed=seed)
            transcripts.append(tr.to_dict())
    payload = _header(config, seed)
    payload["transcripts"] = transcripts
    _emit(json.dumps(payload, indent=1) + "\n", out)


@cli.command("game-bias")
@click.option("--kind", type=click.Choice(["simple", "hypergeometric", "vector", "constant"]), required=True)
@click.option("--m", "m", type=int, required=True)
@click.option("--eps", type=float, default=0.0, show_default=True)
@click.option("--offset", type=int, default=0, show_default=True)
@click.option("--c", "c", type=int, default=None, help="vector blocks / hypergeometric scale")
@click.option("--p", "p", type=int, default=None, help="hypergeometric vector weight")
@click.option("--strict/--allow-any-m", default=True, help="require m congruent to 1 mod 4")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def game_bias(kind, m, eps, offset, c, p, strict, out):
    """Exact optimal bias of an online binomial game, as JSON."""
    if m < 1:
        raise ConfigError("m must be positive")
    if kind == "simple":
        hint = games.Simple()
    elif kind == "constant":
        hint = games.Constant()
    elif kind == "vector":
        hint = games.Vector(c if c is not None else 1)
    else:
        if p is None:
            raise ConfigError("--p is required for hypergeometric games")
        hint = games.Hypergeometric(p, c)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            spec = games.GameSpec(m, eps, offset, hint, strict=strict and m % 4 == 1)
            rep = games.bias_exact(spec)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    config = {"subcommand": "game-bias", "kind": kind, "m": m, "eps": eps, "offset": offset,
              "c": c, "p": p, "strict": strict}
    payload = _header(config, None)
    payload["result"] = {"bias": rep.bias, "direction": rep.direction, "bias_up": rep.bias_up,
                         "bias_down": rep.bias_down, "states": rep.states}
    _emit(json.dumps(payload, indent=1) + "\n", out)


@cli.command("bias-sweep")
@click.option("--protocol", type=click.Choice(["pi2", "pi3", "cleve"]), required=True)
@click.option("--m-grid", required=True, help="comma list or lo:hi:step")
@click.option("--adversary", "adversaries", multiple=True, default=("optimal",), show_default=True)
@click.option("--trials", type=click.IntRange(min=1), default=100_000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--mode", type=click.Choice(["auto", "exact", "mc"]), default="auto", show_default=True,
              help="exact evaluation, Monte Carlo, or exact where available")
@click.option("--baseline/--no-baseline", default=True, help="add majority-protocol rows")
@click.option("--timing/--no-timing", default=True, help="record runtimes (off gives byte-stable output)")
@click.option("--strict/--allow-any-m", default=True, help="require m congruent to 1 mod 4")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.option("--plot", type=click.Path(dir_okay=False), default=None, help="figure path (default: next to --out)")
def bias_sweep(protocol, m_grid, adversaries, trials, seed, mode, baseline, timing, strict, fmt, out, plot):
    """Bias table over a grid of round parameters."""
    grid = _parse_range(m_grid, "m grid")
    if not grid:
        raise ConfigError("empty m grid")
    for m in grid:
        _check_m(m, not strict)
    for a in adversaries:
        if a not in ("optimal", "none", "greedy:0", "greedy:1"):
            raise ConfigError(f"unsupported sweep adversary {a!r}")
    config = {"subcommand": "bias-sweep", "protocol": protocol, "m_grid": grid, "adversaries": list(adversaries),
              "trials": trials, "mode": mode, "baseline": baseline, "timing": timing, "strict": strict, "format": fmt}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            reports = sim.sweep(protocol, list(adversaries), grid, trials, seed, baseline, mode)
        except ValueError as e:
            raise ConfigError(str(e)) from e
    rows = []
    for r in reports:
        row = r.row()
        if not timing:
            row["runtime_ms"] = ""
        rows.append(row)
    meta = _header(config, seed)
    if fmt == "csv":
        text = _csv_text(meta, sim.CSV_COLUMNS, rows)
    else:
        meta["rows"] = rows
        text = json.dumps(meta, indent=1) + "\n"
    _emit(text, out)
    fig = plot or (str(Path(out).with_suffix(".png")) if out else None)
    if fig:
        from .plotting import plot_sweep

        plot_sweep(reports, fig, title=f"{protocol} bias sweep")


@cli.command("validate-numerics")
@click.option("--n-range", default=None, help="sizes for the hard inequalities, lo:hi[:step] or list")
@click.option("--train-range", default=None, help="sizes used to fit constants")
@click.option("--test-range", default=None, help="held-out sizes for fitted constants")
@click.option("--checks", default=None, help=f"comma list from {','.join(CHECKS)}")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def validate_numerics(n_range, train_range, test_range, checks, seed, out):
    """Check the binomial/hypergeometric inequalities; exit 1 if a hard one fails."""
    kw = {"seed": seed}
    if n_range:
        kw["hard_n"] = _parse_range(n_range, "n range")
    if train_range:
        kw["train_n"] = _parse_range(train_range, "train range")
    if test_range:
        kw["test_n"] = _parse_range(test_range, "test range")
    if checks:
        kw["checks"] = tuple(c.strip() for c in checks.split(",") if c.strip())
    for key in ("hard_n", "train_n", "test_n"):
        if key in kw and not kw[key]:
            raise ConfigError(f"empty {key}")
    try:
        grid = EstimateGrid(**kw)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    report = validate_estimates(grid)
    config = {"subcommand": "validate-numerics", "hard_n": list(grid.hard_n), "train_n": list(grid.train_n),
              "test_n": list(grid.test_n), "checks": list(grid.checks)}
    body = report.to_csv()
    head = "".join(f"# {k}={json.dumps(v, sort_keys=True)}\n" for k, v in _header(config, seed).items())
    _emit(head + body, out)
    if not report.hard_ok:
        click.echo("hard inequality violated", err=True)
        sys.exit(1)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="fairflip", standalone_mode=False)
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.UsageError as e:
        e.show()
        return 2
    except click.ClickException as e:
        e.show()
        return 2
    except click.exceptions.Abort:
        return 2
    except InvariantError as e:
        click.echo(f"invariant violation: {e}", err=True)
        return 1
    except SystemExit as e:
        return int(e.code or 0)
    return 0


if __name__ == "__main__":
    sys.exit(main())
