"""Command-line runner: ``qmimo run CONFIG`` and ``qmimo validate CONFIG``.

Exit codes: 0 success, 1 a tolerance check failed, 2 invalid config,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import platform
import sys
import traceback
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy
import yaml

from .config import CONFIG_VERSION, ConfigError, load_config
from .randcore import RNG_ALGORITHM

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        raise FloatingPointError("NaN in output table")
    return repr(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _versions() -> dict:
    try:
        pkg = metadata.version("qmimo")
    except metadata.PackageNotFoundError:
        pkg = "unknown"
    return {"qmimo": pkg, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "pyyaml": yaml.__version__}


def _apply_overrides(cfg, args):
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed: must be >= 0")
        cfg.seed = args.seed
    if args.trials is not None:
        if args.trials < 1:
            raise ConfigError("--trials: must be >= 1")
        cfg.system = dataclasses.replace(cfg.system, trials=args.trials)
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError("--workers: must be >= 1")
        cfg.workers = args.workers
    if args.output_dir is not None:
        cfg.output_dir = str(args.output_dir)
    return cfg


def _origin(exc: BaseException) -> str:
    """Innermost package module on the traceback, for the diagnostic prefix."""
    name = "qmimo"
    for frame in traceback.extract_tb(exc.__traceback__):
        stem = Path(frame.filename).stem
        if Path(frame.filename).parent.name == "qmimo":
            name = f"qmimo.{stem}"
    return name


def cmd_validate(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    print(yaml.safe_dump(cfg.to_dict(), sort_keys=True), end="")
    return EXIT_OK


def cmd_run(args) -> int:
    from .experiments import run_experiment

    cfg = _apply_overrides(load_config(args.config), args)
    out_dir = Path(cfg.output_dir) if args.output_dir is not None else cfg.resolve_path(cfg.output_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output_dir: {out_dir} is not writable ({exc.strerror})") from exc

    with np.errstate(invalid="raise", divide="ignore", over="raise"):
        result = run_experiment(cfg)

    table = out_dir / f"{cfg.experiment}.csv"
    with table.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(result.header)
        for row in result.rows:
            w.writerow([_fmt(v) for v in row])

    summary = {"experiment": cfg.experiment, "seed": cfg.seed, "passed": result.passed, **result.summary}
    (out_dir / "summary.json").write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    manifest = {
        "config": cfg.to_dict(),
        "config_source": str(Path(args.config).resolve()),
        "config_version": CONFIG_VERSION,
        "seed": cfg.seed,
        "rng": RNG_ALGORITHM,
        "versions": _versions(),
        "outputs": [table.name, "summary.json"],
        "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    (out_dir / "manifest.json").write_text(json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n")

    for name, check in sorted(result.summary.get("checks", {}).items()):
        print(f"{'PASS' if check['pass'] else 'FAIL'} {name}")
    print(f"wrote {table}")
    return EXIT_OK if result.passed else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qmimo", description="Linearized quantized-MIMO experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn, help_ in (("run", cmd_run, "run an experiment"), ("validate", cmd_validate, "check a config")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("config", type=Path)
        sp.add_argument("--output-dir", type=Path)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--trials", type=int)
        sp.add_argument("--workers", type=int)
        sp.set_defaults(func=fn)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FloatingPointError, np.linalg.LinAlgError, ValueError, RuntimeError) as exc:
        print(f"numerical error in {_origin(exc)}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
