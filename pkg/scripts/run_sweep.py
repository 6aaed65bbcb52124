"""Run an experiment sweep and write the figure CSVs next to the results.

    python scripts/run_sweep.py --config configs/quick.json --out runs/quick
"""
import argparse
import logging
import sys
from pathlib import Path

from clicklab.cli import FIGURES, cmd_plotdata, cmd_run, UsageError


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", default="configs/default.json")
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=0)
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s", stream=sys.stderr)

    out = Path(args.out)
    cmd_run(args.config, out, args.threads)
    for fig in sorted(FIGURES):
        try:
            cmd_plotdata(out / "results.csv", fig, out / f"{fig}.csv")
        except UsageError as exc:
            logging.warning("skipping %s: %s", fig, exc)


if __name__ == "__main__":
    main()
