"""Command-line front end: ``ionqec {simulate,sweep,compile,analyze,paths}``.

Configs are INI files with ``[run]``, ``[noise]``, ``[sweep]`` and
``[budget]`` sections.  ``--set section.key=value`` overrides single entries;
a bare key is looked up in ``[noise]`` first and then ``[run]``.  Every CSV
starts with a ``#`` line holding the full effective config, seed included,
so a file can be regenerated from its own header: passing an output file
as ``--config`` replays that header.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import sys
from importlib import resources
from pathlib import Path

from . import analytics
from .circuit import CircuitParseError, IonLayout, compile_circuit, format_circuit, insert_refocussing, parse_circuit
from .estimator import (enumerate_paths, estimates_csv, fmt, log_grid, monte_carlo, sweep,
                        sweep_csv, LogicalErrorEstimate)
from .noise import NoiseParams

PRESETS = ("fig6", "fig7", "fig9", "fig10", "budget")
BACKENDS = ("tableau", "dense", "paths")
RUN_DEFAULTS = {"target": "plus", "backend": "tableau", "n_samples": "100000", "seed": "0", "jobs": "1"}


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------- config

def _load(path: str | None) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    if path is None:
        return cp
    if path.startswith("preset:") or (path in PRESETS and not Path(path).exists()):
        name = path.split(":", 1)[-1]
        try:
            text = resources.files("ionqec.presets").joinpath(f"{name}.conf").read_text()
        except FileNotFoundError:
            raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}") from None
        cp.read_string(text, source=name)
        return cp
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    first = p.read_text().split("\n", 1)[0]
    if first.startswith("# {"):
        # an output file: replay the config echoed in its header
        try:
            echoed = json.loads(first[2:])
        except ValueError as exc:
            raise ConfigError(f"unreadable header in {path}: {exc}") from None
        for sec, items in echoed.items():
            cp.add_section(sec)
            for k, v in items.items():
                cp.set(sec, k, v if isinstance(v, str) else json.dumps(v))
        return cp
    try:
        cp.read(p)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    return cp


def _apply_overrides(cp: configparser.ConfigParser, items: list[str]) -> None:
    for item in items:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        key = key.strip()
        if "." in key:
            sec, key = key.split(".", 1)
        elif key in NoiseParams.__dataclass_fields__:
            sec = "noise"
        elif key in RUN_DEFAULTS:
            sec = "run"
        else:
            raise ConfigError(f"cannot place override {key!r}; use section.key")
        if not cp.has_section(sec):
            cp.add_section(sec)
        cp.set(sec, key, value.strip())


def _section(cp, name) -> dict:
    return dict(cp.items(name)) if cp.has_section(name) else {}


def _effective(cp, args) -> dict:
    run = dict(RUN_DEFAULTS)
    run.update(_section(cp, "run"))
    if args.seed is not None:
        run["seed"] = str(args.seed)
    if args.backend is not None:
        run["backend"] = args.backend
    if args.jobs is not None:
        run["jobs"] = str(args.jobs)
    if run["backend"] not in BACKENDS:
        raise ConfigError(f"backend must be one of {BACKENDS}")
    return run


def _noise(cp) -> NoiseParams:
    try:
        return NoiseParams.from_dict(_section(cp, "noise"))
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"[noise]: {exc}") from None


def _int(run, key) -> int:
    try:
        return int(float(run[key]))
    except ValueError:
        raise ConfigError(f"[run] {key} must be an integer") from None


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"not a list of numbers: {text!r}") from None


def _check_backend(noise: NoiseParams, backend: str) -> None:
    if backend == "paths" and noise.has_stochastic():
        raise ConfigError("backend 'paths' needs coherent-only noise (all stochastic rates zero)")
    if backend == "tableau" and noise.p_c > 0 and noise.coherent:
        if noise.crosstalk_kind == "stark" or not noise.refocussing:
            raise ConfigError("coherent crosstalk needs the dense or paths backend")


def _echo(cp, run) -> dict:
    out = {s: _section(cp, s) for s in cp.sections()}
    out["run"] = run
    return out


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# ------------------------------------------------------------- commands

def _estimate(noise, run, target, backend, seed) -> LogicalErrorEstimate:
    if backend == "paths":
        r = enumerate_paths(noise, target)
        return LogicalErrorEstimate(r.p_log, 0.0, 0, noise)
    return monte_carlo(noise, _int(run, "n_samples"), seed, target, backend, _int(run, "jobs"))


def cmd_simulate(cp, args) -> int:
    run = _effective(cp, args)
    noise = _noise(cp)
    _check_backend(noise, run["backend"])
    est = _estimate(noise, run, run["target"], run["backend"], _int(run, "seed"))
    print(f"p_log={fmt(est.p_log)} err={fmt(est.err)} n_samples={est.n_samples}", file=sys.stderr)
    _write(estimates_csv([({"target": run["target"]}, est)], _echo(cp, run)), args.out)
    return 0


def _grid(sw: dict) -> list[float]:
    if "values" in sw:
        grid = _floats(sw["values"])
    elif "lo" in sw and "hi" in sw:
        lo, hi = float(sw["lo"]), float(sw["hi"])
        if not 0 < lo <= hi:
            raise ConfigError("[sweep] needs 0 < lo <= hi")
        grid = log_grid(lo, hi, int(sw.get("per_decade", 8)))
    else:
        grid = []
    if not grid:
        raise ConfigError("[sweep] grid is empty (give values= or lo=/hi=)")
    return grid


def cmd_sweep(cp, args) -> int:
    run = _effective(cp, args)
    noise = _noise(cp)
    sw = _section(cp, "sweep")
    axis = sw.get("axis", "p_ms")
    if axis not in NoiseParams.__dataclass_fields__:
        raise ConfigError(f"[sweep] unknown axis {axis!r}")
    grid = _grid(sw)
    seed = _int(run, "seed")
    if "compare" in sw:
        return _sweep_compare(cp, run, noise, sw, axis, grid, seed, args.out)
    outer_key = sw.get("outer")
    outer_vals = _floats(sw["outer_values"]) if outer_key else [None]
    if outer_key and outer_key not in NoiseParams.__dataclass_fields__:
        raise ConfigError(f"[sweep] unknown outer parameter {outer_key!r}")
    parts = []
    for k, ov in enumerate(outer_vals):
        nz = noise.with_(**{outer_key: ov}) if outer_key else noise
        _check_backend(nz, run["backend"])
        res = sweep(axis, grid, nz, _int(run, "n_samples"), seed + 1000 * k, run["target"], run["backend"],
                    _int(run, "jobs"), _echo(cp, run))
        text = sweep_csv(res)
        if outer_key:
            text = text.replace("# pseudo_threshold=", f"# pseudo_threshold[{outer_key}={fmt(ov)}]=")
            if k:
                text = "".join(ln + "\n" for ln in text.splitlines()[2:])   # one header per file
        parts.append(text)
        print(f"{outer_key or axis}: threshold={res.threshold if res.threshold is not None else 'absent'}",
              file=sys.stderr)
    _write("".join(parts), args.out)
    return 0


def _sweep_compare(cp, run, noise, sw, axis, grid, seed, out) -> int:
    """Two noise modes side by side with their ratio (second over first)."""
    pairs = []
    for item in sw["compare"].split(","):
        mode, _, backend = item.strip().partition(":")
        if backend not in BACKENDS:
            raise ConfigError(f"[sweep] compare entry {item!r} needs mode:backend")
        pairs.append((mode, backend))
    if len(pairs) != 2:
        raise ConfigError("[sweep] compare takes exactly two mode:backend entries")
    targets = [t.strip() for t in sw.get("targets", run["target"]).split(",")]
    models = []
    for mode, backend in pairs:
        nz = noise.with_(crosstalk_mode=mode)
        _check_backend(nz.with_(**{axis: grid[-1]}), backend)
        models.append((nz, backend))
    buf = io.StringIO()
    buf.write("# " + json.dumps(_echo(cp, run), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["target", axis] + [f"p_log[{m}]" for m, _ in pairs] + [f"err[{m}]" for m, _ in pairs]
               + ["ratio"])
    for t in targets:
        for k, v in enumerate(grid):
            ests = [_estimate(nz.with_(**{axis: v}), run, t, b, seed + k) for nz, b in models]
            ratio = ests[1].p_log / ests[0].p_log if ests[0].p_log > 0 else math.nan
            w.writerow([t, fmt(v)] + [fmt(e.p_log) for e in ests] + [fmt(e.err) for e in ests] + [fmt(ratio)])
    _write(buf.getvalue(), out)
    return 0


def cmd_paths(cp, args) -> int:
    run = _effective(cp, args)
    noise = _noise(cp)
    _check_backend(noise, "paths")
    r = enumerate_paths(noise, run["target"])
    buf = io.StringIO()
    buf.write("# " + json.dumps(_echo(cp, run), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["target", "p_log", "accepted_weight", "discarded_weight", "pruned_weight", "leaves"])
    w.writerow([run["target"], fmt(r.p_log), fmt(r.accepted_weight), fmt(r.discarded_weight),
                fmt(r.pruned_weight), r.leaves])
    _write(buf.getvalue(), args.out)
    return 0


def cmd_compile(args) -> int:
    src = sys.stdin.read() if args.circuit in (None, "-") else Path(args.circuit).read_text()
    circ = compile_circuit(parse_circuit(src))
    if args.refocus:
        circ = insert_refocussing(circ, IonLayout.plain(circ.num_ions))
    _write(format_circuit(circ).rstrip("\n") + "\n", args.out)
    return 0


def cmd_analyze(cp, args) -> int:
    if args.config is None:
        inp = analytics.MsBudgetInput()
    else:
        if not cp.has_section("budget"):
            raise ConfigError("config has no [budget] section")
        raw = _section(cp, "budget")
        need = [f for f in analytics.MsBudgetInput.__dataclass_fields__ if f not in raw]
        if need:
            raise ConfigError(f"[budget] missing field(s): {', '.join(need)}")
        try:
            inp = analytics.MsBudgetInput.from_dict(raw)
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"[budget]: {exc}") from None
    head = "# " + json.dumps({"budget": inp.as_dict()}, sort_keys=True) + "\n"
    _write(head + analytics.budget_table(inp) + "\n", args.out)
    return 0


# ------------------------------------------------------------------ main

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ionqec", description="Trapped-ion Steane-code QEC simulator")
    sub = ap.add_subparsers(dest="cmd", required=True)
    for name in ("simulate", "sweep", "paths", "analyze"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="INI config file or preset name (fig6, fig7, fig9, fig10, budget)")
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        p.add_argument("--backend", choices=BACKENDS)
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
        p.add_argument("--jobs", type=int)
    p = sub.add_parser("compile")
    p.add_argument("circuit", nargs="?", help="circuit file ('-' or omitted reads stdin)")
    p.add_argument("--refocus", action="store_true")
    p.add_argument("--out")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.cmd == "compile":
            return cmd_compile(args)
        cp = _load(args.config)
        _apply_overrides(cp, args.set)
        return {"simulate": cmd_simulate, "sweep": cmd_sweep, "paths": cmd_paths,
                "analyze": cmd_analyze}[args.cmd](cp, args)
    except (ConfigError, CircuitParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
