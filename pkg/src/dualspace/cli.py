"""Command-line front end: ``dualcs run | validate | list-experiments``."""

from __future__ import annotations

import argparse
import json
import subprocess
import sys
import time
from pathlib import Path

from . import __version__, io
from .analysis import resolve_workers
from .experiments import EXPERIMENTS, resolve_params

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
TOP_LEVEL = ("experiment", "master_seed", "output_dir", "trials")
DEFAULT_OUTPUT = "results"


class ConfigError(Exception):
    pass


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_overrides(tokens: list[str]) -> dict:
    """``--key value`` pairs into a dict; dashes in keys become underscores."""
    out = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--") or len(tok) < 3:
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, val = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(tokens) or tokens[i + 1].startswith("--"):
                raise ConfigError(f"missing value for --{key}")
            val = tokens[i + 1]
            i += 2
        out[key.replace("-", "_")] = _parse_value(val)
    return out


def load_config(path: str | None, overrides: dict) -> dict:
    """Config file (or a previous manifest) merged with command-line overrides."""
    cfg: dict = {}
    if path is not None:
        try:
            cfg = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
        if "config" in cfg and isinstance(cfg["config"], dict):
            cfg = cfg["config"]
    cfg = {**cfg, "params": dict(cfg.get("params") or {})}
    for k, v in overrides.items():
        if k in TOP_LEVEL:
            cfg[k] = v
        else:
            cfg["params"][k] = v
    return cfg


def validate(cfg: dict) -> tuple[dict | None, list[dict]]:
    """Schema check. Returns the resolved config (None on error) and diagnostics."""
    diags: list[dict] = []

    def err(msg):
        diags.append({"level": "error", "message": msg})

    def note(msg):
        diags.append({"level": "notice", "message": msg})

    for k in cfg:
        if k not in TOP_LEVEL + ("params",):
            err(f"unknown key {k!r}")
    name = cfg.get("experiment")
    if name not in EXPERIMENTS:
        err(f"experiment must be one of {sorted(EXPERIMENTS)}, got {name!r}")
        return None, diags
    exp = EXPERIMENTS[name]
    seed = cfg.get("master_seed")
    if seed is None:
        note("master_seed missing; defaulting to 0")
        seed = 0
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        err(f"master_seed must be a 64-bit unsigned integer, got {seed!r}")
    trials = cfg.get("trials", exp.default_trials)
    if isinstance(trials, bool) or not isinstance(trials, int) or trials < 1:
        err(f"trials must be a positive integer, got {trials!r}")
    out_dir = cfg.get("output_dir", DEFAULT_OUTPUT)
    if not isinstance(out_dir, str) or not out_dir:
        err("output_dir must be a non-empty path")
    params, perrs = resolve_params(exp, cfg.get("params", {}))
    for e in perrs:
        err(e)
    if not perrs:
        for check in exp.checks:
            for e in check(params, trials):
                err(e)
    if any(d["level"] == "error" for d in diags):
        return None, diags
    return {"experiment": name, "master_seed": seed, "trials": trials, "output_dir": out_dir,
            "params": params}, diags


def version_string() -> str:
    try:
        desc = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                              cwd=Path(__file__).resolve().parent, capture_output=True,
                              text=True, timeout=5)
        if desc.returncode == 0 and desc.stdout.strip():
            return f"{__version__}+g{desc.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def run(cfg: dict, workers: int | None = None, figures: bool = False) -> int:
    resolved, diags = validate(cfg)
    for d in diags:
        print(f"{d['level']}: {d['message']}", file=sys.stderr)
    if resolved is None:
        return EXIT_CONFIG
    exp = EXPERIMENTS[resolved["experiment"]]
    workers = resolve_workers(workers)
    out = Path(resolved["output_dir"]) / exp.name / str(resolved["master_seed"])
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        summary = exp.runner(resolved["params"], resolved["trials"], resolved["master_seed"],
                             workers, out)
        if figures:
            from .report import render_figures
            render_figures(exp.name, out)
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    manifest = {
        "config": resolved,
        "version": version_string(),
        "workers": workers,
        "wall_time_seconds": time.perf_counter() - t0,
        "summary": summary,
        "files": sorted(p.name for p in out.iterdir() if p.name != "manifest.json"),
    }
    io.write_json(manifest, out / "manifest.json")
    print(out)
    return EXIT_OK


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dualcs", description="Dual-space compressed sensing experiments")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (("run", "run an experiment"), ("validate", "check a config")):
        sp = sub.add_parser(name, help=helptext,
                            epilog="Any further --key value pair overrides a config entry.")
        sp.add_argument("config", nargs="?", help="JSON config file or a previous manifest.json "
                        "(must come before any --key value override)")
        if name == "run":
            sp.add_argument("--workers", type=int, default=None,
                            help="trial processes (default: $DUALCS_WORKERS or all cores)")
            sp.add_argument("--figures", action="store_true",
                            help="also render PNG figures with matplotlib")
    sub.add_parser("list-experiments", help="list experiments and their parameters")
    return p


def _split(argv: list[str]) -> tuple[list[str], list[str]]:
    """Separate argparse-owned tokens from ``--key value`` overrides."""
    own = argv[:1]
    rest = argv[1:]
    if rest and not rest[0].startswith("-"):
        own.append(rest.pop(0))
    overrides, i = [], 0
    while i < len(rest):
        t = rest[i]
        if t in ("--figures", "-h", "--help") or t.startswith("--workers="):
            own.append(t)
            i += 1
        elif t == "--workers":
            own.extend(rest[i:i + 2])
            i += 2
        else:
            overrides.append(t)
            i += 1
    return own, overrides


def main(argv: list[str] | None = None) -> int:
    parser = _parser()
    own, rest = _split(list(sys.argv[1:] if argv is None else argv))
    args = parser.parse_args(own)
    if args.command == "list-experiments":
        if rest:
            parser.error(f"unexpected arguments {rest}")
        for name, exp in EXPERIMENTS.items():
            print(f"{name}: {exp.description} (default trials {exp.default_trials})")
            for pname, p in exp.params.items():
                print(f"    {pname} [{p.kind}] = {p.default!r}  {p.help}")
        return EXIT_OK
    try:
        cfg = load_config(args.config, parse_overrides(rest))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        resolved, diags = validate(cfg)
        for d in diags:
            print(f"{d['level']}: {d['message']}")
        if resolved is None:
            return EXIT_CONFIG
        print("ok")
        return EXIT_OK
    if args.workers is not None and args.workers < 1:
        print("error: --workers must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg, args.workers, args.figures)


if __name__ == "__main__":
    sys.exit(main())
