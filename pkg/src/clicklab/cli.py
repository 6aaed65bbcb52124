"""Command line entry point: ``clicklab {run,oracle,plotdata}``.

Exit codes: 0 success, 1 runtime failure, 2 invalid input.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import sys
from collections import defaultdict
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError
from .harness import ExperimentConfig, load_config, run_experiment
from .oracle import OracleConfig, Status, run_oracle_suite, write_oracle_csv

log = logging.getLogger("clicklab")

RESULTS = "results.csv"
SUMMARY = "summary.csv"
DIAGNOSTICS = "diagnostics.csv"
PAIRS = "feature_pairs.csv"
MANIFEST = "manifest.json"

# figure -> (features, needs several exponents)
FIGURES = {
    "fig1": (("TRUE_RELEVANCE", "PROXY", "IPW_CTR"), False),
    "fig2": (("CTR", "IPW_CTR"), False),
    "fig3": (("CTR", "IPW_CTR"), True),
    "fig4": (("EMPIRICAL_CTR", "CTR", "IPW_CTR"), False),
    "fig5": (("IPW_CTR", "IPW_COEC", "EMPIRICAL_CTR", "COEC"), False),
    "fig6": ((), False),
    "fig7": (("IPW_CTR", "IPW_COEC"), True),
}
BASE_EXPONENT = 0.5


class UsageError(Exception):
    pass


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _config_hash(data: dict) -> str:
    return hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()


def _write_manifest(out: Path, config_dict: dict, seed: int, started: str, outputs: list) -> None:
    manifest = {
        "config_hash": _config_hash(config_dict),
        "master_seed": seed,
        "artifact_version": __version__,
        "started": started,
        "finished": _now(),
        "outputs": [str(out / o) for o in outputs],
        "config": config_dict,
    }
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def cmd_run(config_path, out_dir, threads: int = 1) -> int:
    config = load_config(config_path) if config_path else ExperimentConfig()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = _now()
    report = run_experiment(config, threads=threads, progress=True)
    report.write_results_csv(out / RESULTS)
    report.write_summary_csv(out / SUMMARY)
    report.write_diagnostics_csv(out / DIAGNOSTICS)
    outputs = [RESULTS, SUMMARY, DIAGNOSTICS]
    if config.export_feature_pairs:
        report.write_feature_pairs_csv(out / PAIRS)
        outputs.append(PAIRS)
    _write_manifest(out, config.to_dict(), config.master_seed, started, outputs)
    log.info("wrote %s", ", ".join(outputs + [MANIFEST]))
    return 0


def cmd_oracle(config_path, out_dir) -> int:
    config = load_config(config_path, OracleConfig) if config_path else OracleConfig()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = _now()
    claims = run_oracle_suite(config)
    write_oracle_csv(claims, out / "oracle.csv")
    _write_manifest(out, dataclasses.asdict(config), config.seed, started, ["oracle.csv"])
    counts = defaultdict(int)
    for c in claims:
        counts[c.status.value] += 1
    log.info("oracle claims: %s", ", ".join(f"{k}={v}" for k, v in sorted(counts.items())))
    return 1 if counts[Status.FAIL.value] else 0


def _read_results(path: Path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    need = {"exponent", "train_size", "feature", "replication", "clicks_per_search"}
    if not rows or not need <= set(rows[0]):
        raise UsageError(f"{path}: not a results file (need columns {', '.join(sorted(need))})")
    cells = defaultdict(list)
    for r in rows:
        cells[(float(r["exponent"]), int(r["train_size"]), r["feature"])].append(float(r["clicks_per_search"]))
    return cells


def plot_rows(cells: dict, figure: str) -> list[dict]:
    """Tidy rows for one figure; raises UsageError listing absent cells."""
    if figure not in FIGURES:
        raise UsageError(f"unknown figure {figure!r}")
    features, multi_exp = FIGURES[figure]
    exponents = sorted({x for x, _, _ in cells})
    sizes = sorted({t for _, t, _ in cells})
    if multi_exp:
        if len(exponents) < 2:
            raise UsageError(f"{figure} needs at least two exponents, results have {exponents}")
        wanted_exp = exponents
    else:
        if BASE_EXPONENT not in exponents:
            raise UsageError(f"{figure} needs exponent {BASE_EXPONENT}; results have {exponents}")
        wanted_exp = [BASE_EXPONENT]
    reps = max(len(v) for v in cells.values())
    missing = []
    for x in wanted_exp:
        for t in sizes:
            for f in features:
                n = len(cells.get((x, t, f), []))
                if n < reps:
                    missing.append(f"exponent={x} train_size={t} feature={f} ({n}/{reps} replications)")
    if missing:
        raise UsageError("missing sweep coverage:\n  " + "\n  ".join(missing))
    rows = []
    for x in wanted_exp:
        for f in features:
            for t in sizes:
                v = np.array(cells[(x, t, f)])
                rows.append({"figure": figure, "exponent": repr(x), "train_size": t, "feature": f,
                             "mean": repr(float(v.mean())),
                             "sd": repr(float(v.std(ddof=1)) if len(v) > 1 else 0.0),
                             "replications": len(v)})
    return rows


def cmd_plotdata(results_path, figure: str, out_path) -> int:
    results_path = Path(results_path)
    if not results_path.exists():
        raise UsageError(f"{results_path}: no such file")
    if figure == "fig6":
        pairs = results_path.parent / PAIRS
        if not pairs.exists():
            raise UsageError(f"fig6 needs {pairs} (run with \"export_feature_pairs\": true)")
        Path(out_path).write_text(pairs.read_text())
        return 0
    rows = plot_rows(_read_results(results_path), figure)
    with open(out_path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="clicklab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config (defaults used when omitted)")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--quiet", action="store_true")

    run = sub.add_parser("run", help="run a ranking experiment sweep")
    common(run)
    run.add_argument("--threads", type=int, default=1, help="worker processes, 0 = one per CPU")
    orc = sub.add_parser("oracle", help="run the Monte Carlo oracle suite")
    common(orc)
    orc.add_argument("--threads", type=int, default=1, help="accepted for symmetry; the suite is single-process")
    plot = sub.add_parser("plotdata", help="emit plot-ready CSV for one figure")
    plot.add_argument("--results", required=True)
    plot.add_argument("--figure", required=True, choices=sorted(FIGURES))
    plot.add_argument("--out", required=True)
    plot.add_argument("--quiet", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(asctime)s %(name)s: %(message)s", stream=sys.stderr, force=True)
    try:
        if args.command == "run":
            if args.threads < 0:
                raise UsageError("--threads must be >= 0")
            return cmd_run(args.config, args.out, args.threads)
        if args.command == "oracle":
            return cmd_oracle(args.config, args.out)
        return cmd_plotdata(args.results, args.figure, args.out)
    except (ConfigError, UsageError, FileNotFoundError) as exc:
        print(f"clicklab: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.exception("run failed")
        print(f"clicklab: runtime failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
