"""Run every sweep config in configs/ and the counting distribution.

Usage: python3 scripts/run_configs.py [--out results] [--only detuning] [--no-plots]
"""

import argparse
import sys
import time
from pathlib import Path

from fcsreadout.cli import main as cli

ROOT = Path(__file__).resolve().parents[1]


def run():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(ROOT / "results"))
    ap.add_argument("--only", default="", help="prefix filter on config names")
    ap.add_argument("--no-plots", action="store_true")
    args = ap.parse_args()

    worst = 0
    for cfg in sorted((ROOT / "configs").glob("*.ini")):
        if not cfg.stem.startswith(args.only):
            continue
        t0 = time.time()
        if cfg.stem == "distribution":
            argv = ["distribution", "--config", str(cfg), "--out", args.out]
        else:
            argv = ["sweep", "--config", str(cfg), "--out", args.out]
            if args.no_plots:
                argv.append("--no-plots")
        code = cli(argv)
        print(f"  {cfg.stem}: exit {code} in {time.time() - t0:.1f} s")
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(run())
