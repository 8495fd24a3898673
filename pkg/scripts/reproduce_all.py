"""Run every shipped config and print the check lines.

    python3 scripts/reproduce_all.py [--trials N] [--workers W]

Outputs land in results/<experiment>/ (CSV, summary.json, manifest.json).
"""

import argparse
import sys
from pathlib import Path

from qmimo.cli import main

ROOT = Path(__file__).resolve().parents[1]
ORDER = ["beam_pattern", "aclr_sweep", "validate_linearization", "rate_sweep", "custom"]


def run(args):
    status = 0
    for name in ORDER:
        argv = ["run", str(ROOT / "configs" / f"{name}.yaml")]
        if args.trials:
            argv += ["--trials", str(args.trials)]
        if args.workers:
            argv += ["--workers", str(args.workers)]
        print(f"== {name}")
        status = max(status, main(argv))
    return status


if __name__ == "__main__":
    p = argparse.ArgumentParser()
    p.add_argument("--trials", type=int)
    p.add_argument("--workers", type=int)
    sys.exit(run(p.parse_args()))
