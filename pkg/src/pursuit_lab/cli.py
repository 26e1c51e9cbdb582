"""Command-line front end: ``run``, ``compare``, ``sweep`` and ``generate``.

Exit codes: 0 success, 1 usage or input error, 2 the experiment itself
failed (timeout, collision, controller failure).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from pathlib import Path as FilePath
from typing import Any, Sequence

import numpy as np

from pursuit_lab import __version__
from pursuit_lab.core_types import ControllerConfig, Variant, _toml_value, tomllib
from pursuit_lab.report import comparison_table, render_svg
from pursuit_lab.scenarios import SCENARIO_KINDS, generate_scenario
from pursuit_lab.simulator import (
    MetricsReport,
    Scenario,
    SimConfig,
    TrajectoryLog,
    load_scenario,
    log_to_csv,
    run_many,
    write_scenario,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILED = 2
THREADS_ENV = "PURSUIT_LAB_THREADS"
VARIANTS = tuple(v.value for v in Variant)


class UsageError(Exception):
    """Bad arguments or unreadable inputs; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for failed experiments here
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pursuit-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("scenario", help="scenario TOML file")
        p.add_argument("--config", help="TOML file with [controller] and optional [sim] tables")
        p.add_argument("--out", default="results", help="output directory (default: results)")

    p = sub.add_parser("run", help="run one variant on a scenario")
    common(p)
    p.add_argument("--variant", choices=VARIANTS, default=None,
                   help="controller variant (default: from --config, else rpp)")

    p = sub.add_parser("compare", help="run PP, APP and RPP on the same scenario")
    common(p)

    p = sub.add_parser("sweep", help="run one variant once per value of a config field")
    common(p)
    p.add_argument("--param", required=True, help="ControllerConfig field to vary")
    p.add_argument("--values", required=True, help="comma-separated values, e.g. 1.0,1.25,1.5")
    p.add_argument("--variant", choices=VARIANTS, default=None)

    p = sub.add_parser("generate", help="write a generated scenario as grid, path and TOML files")
    p.add_argument("kind", choices=SCENARIO_KINDS)
    p.add_argument("--out", required=True, help="directory to write the scenario into")
    p.add_argument("--set", action="append", default=[], metavar="NAME=VALUE",
                   help="generator parameter, repeatable")
    return parser


# --- inputs ---------------------------------------------------------------

def _require_file(name: str | None) -> FilePath | None:
    if name is None:
        return None
    path = FilePath(name)
    if not path.is_file():
        raise UsageError(f"file not found: {name}")
    return path


def _load_scenario(name: str) -> Scenario:
    path = _require_file(name)
    try:
        return load_scenario(path)
    except FileNotFoundError as exc:
        raise UsageError(f"file not found: {exc.filename}") from exc
    except (ValueError, KeyError, TypeError, tomllib.TOMLDecodeError) as exc:
        raise UsageError(f"{name}: {exc}") from exc


def _load_overrides(name: str | None) -> tuple[dict[str, Any], dict[str, Any]]:
    """Controller and sim tables of a ``--config`` file."""
    path = _require_file(name)
    if path is None:
        return {}, {}
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"{name}: {exc}") from exc
    controller = doc.get("controller", {})
    sim = doc.get("sim", {})
    if not isinstance(controller, dict) or not isinstance(sim, dict):
        raise UsageError(f"{name}: [controller] and [sim] must be tables")
    unknown = set(controller) - set(ControllerConfig.field_names())
    if unknown:
        raise UsageError(f"{name}: unknown controller keys {sorted(unknown)}")
    unknown = set(sim) - set(SimConfig.__dataclass_fields__)
    if unknown:
        raise UsageError(f"{name}: unknown sim keys {sorted(unknown)}")
    return controller, sim


def _resolve(scenario: Scenario, overrides: dict[str, Any], variant: str | None,
             **extra: Any) -> ControllerConfig:
    """Defaults, then scenario overrides, then the config file, then ``extra``."""
    changes = dict(overrides)
    changes.update(extra)
    variant = variant if variant is not None else changes.pop("variant", None)
    changes.pop("variant", None)
    try:
        return scenario.controller_config(variant, **changes)
    except (ValueError, TypeError) as exc:
        raise UsageError(f"invalid controller configuration: {exc}") from exc


def _sim(scenario: Scenario, overrides: dict[str, Any]) -> SimConfig:
    try:
        return scenario.sim_config(**overrides)
    except (ValueError, TypeError) as exc:
        raise UsageError(f"invalid sim configuration: {exc}") from exc


def _workers() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw == "":
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def _digest(path: str | FilePath) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


# --- outputs --------------------------------------------------------------

def _quote(s: str) -> str:
    # JSON string escapes are valid TOML basic strings
    return json.dumps(s)


def write_manifest(out: FilePath, argv: Sequence[str], inputs: Sequence[str | FilePath],
                   outputs: Sequence[FilePath], configs: dict[str, ControllerConfig],
                   sim: SimConfig) -> FilePath:
    """Write ``manifest.txt`` (TOML) before any result file exists."""
    out.mkdir(parents=True, exist_ok=True)
    manifest = out / "manifest.txt"
    lines = [
        f"version = {_quote(__version__)}",
        "command = [" + ", ".join(_quote(a) for a in argv) + "]",
        "outputs = [" + ", ".join(_quote(str(p)) for p in [manifest, *outputs]) + "]",
        "",
        "[inputs]",
    ]
    for path in inputs:
        lines.append(f"{_quote(str(path))} = {_quote('sha256:' + _digest(path))}")
    lines += ["", "[sim]"]
    for key, value in sim.__dict__.items():
        lines.append(f"{key} = {_toml_value(value)}")
    for name, cfg in configs.items():
        lines += ["", f"[config.{_quote(name)}]"]
        for key, value in cfg.to_dict().items():
            lines.append(f"{key} = {_toml_value(value)}")
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest


def _run_files(directory: FilePath, plot: bool = True) -> dict[str, FilePath]:
    files = {"trajectory": directory / "trajectory.csv", "metrics": directory / "metrics.txt"}
    if plot:
        files["plot"] = directory / "plot.svg"
    return files


def _write_run(files: dict[str, FilePath], scenario: Scenario, log: TrajectoryLog,
               metrics: MetricsReport, cfg: ControllerConfig, title: str) -> None:
    files["trajectory"].parent.mkdir(parents=True, exist_ok=True)
    files["trajectory"].write_text(log_to_csv(log), encoding="utf-8")
    files["metrics"].write_text(metrics.to_text(), encoding="utf-8")
    if "plot" in files:
        grid = scenario.grid
        for ev in scenario.events:
            if _event_fired(ev, log):
                (x0, y0), (x1, y1) = ev.rect
                grid = grid.with_rectangle(x0, y0, x1, y1)
        svg = render_svg(grid, scenario.path_points, [log], cfg.v_max, title)
        files["plot"].write_text(svg, encoding="utf-8")


def _event_fired(event, log: TrajectoryLog) -> bool:
    from pursuit_lab.simulator import _segments_intersect

    pos = log.positions(include_start=True)
    return any(_segments_intersect(tuple(a), tuple(b), *event.trigger) for a, b in zip(pos[:-1], pos[1:]))


def _inputs(scenario: Scenario, config: str | None) -> list[str]:
    files = list(scenario.source_files)
    if config is not None:
        files.append(config)
    return files


# --- commands -------------------------------------------------------------

def cmd_run(args: argparse.Namespace, argv: Sequence[str]) -> int:
    scenario = _load_scenario(args.scenario)
    overrides, sim_overrides = _load_overrides(args.config)
    cfg = _resolve(scenario, overrides, args.variant)
    sim = _sim(scenario, sim_overrides)
    out = FilePath(args.out)
    files = _run_files(out)
    write_manifest(out, argv, _inputs(scenario, args.config), list(files.values()),
                   {cfg.variant.value: cfg}, sim)
    (log, metrics), = run_many([(scenario, cfg, sim)])
    _write_run(files, scenario, log, metrics, cfg, f"{scenario.name}: {cfg.variant.value.upper()}")
    print(metrics.to_text(), end="")
    return EXIT_OK if metrics.success else EXIT_FAILED


def cmd_compare(args: argparse.Namespace, argv: Sequence[str]) -> int:
    scenario = _load_scenario(args.scenario)
    overrides, sim_overrides = _load_overrides(args.config)
    configs = {v: _resolve(scenario, overrides, v) for v in VARIANTS}
    sim = _sim(scenario, sim_overrides)
    out = FilePath(args.out)
    per_variant = {v: _run_files(out / v) for v in VARIANTS}
    table_file = out / "comparison.txt"
    outputs = [f for files in per_variant.values() for f in files.values()] + [table_file]
    write_manifest(out, argv, _inputs(scenario, args.config), outputs, configs, sim)

    results = run_many([(scenario, configs[v], sim) for v in VARIANTS],
                       workers=min(_workers(), len(VARIANTS)))
    metrics: dict[str, MetricsReport | None] = {}
    for v, (log, m) in zip(VARIANTS, results):
        _write_run(per_variant[v], scenario, log, m, configs[v], f"{scenario.name}: {v.upper()}")
        metrics[v] = m
    table = comparison_table(metrics, scenario.kind)
    table_file.write_text(table, encoding="utf-8")
    print(table, end="")
    return EXIT_OK if any(m is not None and m.success for m in metrics.values()) else EXIT_FAILED


def _parse_values(param: str, raw: str) -> list[Any]:
    default = ControllerConfig.__dataclass_fields__[param].default
    values = []
    for item in (s.strip() for s in raw.split(",")):
        if not item:
            raise UsageError(f"--values contains an empty entry: {raw!r}")
        if isinstance(default, bool):
            if item.lower() not in ("true", "false"):
                raise UsageError(f"{param} takes true/false, got {item!r}")
            values.append(item.lower() == "true")
        elif isinstance(default, float):
            try:
                values.append(float(item))
            except ValueError:
                raise UsageError(f"{param} takes numbers, got {item!r}") from None
        else:
            values.append(item)
    return values


def near_obstacle_speed(log: TrajectoryLog, d_prox: float) -> float:
    """Mean achieved speed over steps within ``d_prox`` of an obstacle (NaN if none)."""
    near = [abs(r.v) for r in log.records if r.d_O <= d_prox]
    return float(np.mean(near)) if near else math.nan


SWEEP_COLUMNS = ("value", "average_distance_to_path", "time", "average_speed",
                 "near_obstacle_speed", "collisions", "outcome")


def cmd_sweep(args: argparse.Namespace, argv: Sequence[str]) -> int:
    names = ControllerConfig.field_names()
    if args.param not in names:
        raise UsageError(f"unknown parameter {args.param!r}; valid names: {', '.join(names)}")
    values = _parse_values(args.param, args.values)
    scenario = _load_scenario(args.scenario)
    overrides, sim_overrides = _load_overrides(args.config)
    configs = {f"{args.param}={v}": _resolve(scenario, overrides, args.variant, **{args.param: v})
               for v in values}
    sim = _sim(scenario, sim_overrides)
    out = FilePath(args.out)
    per_value = {key: _run_files(out / key, plot=False) for key in configs}
    table_files = [out / "sweep.csv", out / "sweep.txt"]
    outputs = [f for files in per_value.values() for f in files.values()] + table_files
    write_manifest(out, argv, _inputs(scenario, args.config), outputs, configs, sim)

    results = run_many([(scenario, cfg, sim) for cfg in configs.values()],
                       workers=min(_workers(), len(configs)))
    rows = []
    for value, (key, cfg), (log, m) in zip(values, configs.items(), results):
        _write_run(per_value[key], scenario, log, m, cfg, key)
        rows.append((value, m.average_distance_to_path, m.time, m.average_speed,
                     near_obstacle_speed(log, cfg.d_prox), m.collisions, m.outcome))

    csv_lines = [",".join(SWEEP_COLUMNS)]
    csv_lines += [",".join(str(c) if not isinstance(c, float) else repr(c) for c in r) for r in rows]
    table_files[0].write_text("\n".join(csv_lines) + "\n", encoding="utf-8")
    header = f"{args.param:>10}  {'tracking err (m)':>16}  {'time (s)':>9}  {'avg speed':>9}  outcome"
    text = [header]
    for value, err, time, speed, _near, _coll, outcome in rows:
        text.append(f"{str(value):>10}  {err:16.4f}  {time:9.2f}  {speed:9.3f}  {outcome}")
    table_files[1].write_text("\n".join(text) + "\n", encoding="utf-8")
    print("\n".join(text))
    ok = any(outcome in ("goal_reached", "stopped") and coll == 0
             for *_rest, coll, outcome in rows)
    return EXIT_OK if ok else EXIT_FAILED


def _parse_generator_params(items: Sequence[str]) -> dict[str, Any]:
    params: dict[str, Any] = {}
    for item in items:
        name, sep, raw = item.partition("=")
        if not sep or not name:
            raise UsageError(f"--set expects NAME=VALUE, got {item!r}")
        try:
            params[name] = tomllib.loads(f"v = {raw}")["v"]
        except tomllib.TOMLDecodeError:
            params[name] = raw
    return params


def cmd_generate(args: argparse.Namespace, argv: Sequence[str]) -> int:
    params = _parse_generator_params(args.set)
    try:
        scenario = generate_scenario(args.kind, **params)
    except TypeError as exc:
        raise UsageError(f"bad generator parameter: {exc}") from exc
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    path = write_scenario(scenario, args.out)
    print(path)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "compare": cmd_compare, "sweep": cmd_sweep, "generate": cmd_generate}


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args, ["pursuit-lab", *argv])
    except UsageError as exc:
        print(f"pursuit-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
