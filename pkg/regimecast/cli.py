"""
Command line entry points.

    regimecast simulate --out DIR [--seed N] [--periods T]
    regimecast estimate --data FILE --config FILE --out DIR [--seed N]
    regimecast forecast --vintages DIR --config FILE --out DIR [--seed N]
    regimecast report   --run DIR --out DIR

Exit status is 0 exactly when nothing was logged at ERROR level; usage
problems (unknown flags, unreadable paths) exit with 2.
"""

import argparse
import datetime as dt
import json
import logging
import os
import subprocess
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import pandas as pd
from pydantic import ValidationError

import regimecast
from regimecast.config import RunConfig, Settings
from regimecast.data_loader import VintageStore, load_dataset, write_dataset, write_states
from regimecast.dgp import default_test_params, simulate_msvecm
from regimecast.diagnostics import (
    MIN_DRAWS,
    compute_diagnostics,
    coefficient_distance_summary,
    cointegration_error_paths,
    covariance_summary,
    regime_probabilities,
    tau_summary,
    transition_probability_paths,
)
from regimecast.distributions import make_rng
from regimecast.draws import PosteriorDraws
from regimecast.errors import RegimecastError
from regimecast.forecast import run_recursive_exercise
from regimecast.sampler import run_chains

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
RUN_FILES = ("config.json", "manifest.json", "data.csv", "diagnostics.csv", "draws/draws.json")
DIAGNOSTIC_COLUMNS = ["block", "parameter", "mean", "sd", "p16", "p50", "p84", "inefficiency"]


class UsageError(Exception):
    """Bad invocation; maps to exit status 2."""


class ErrorCountingHandler(logging.Handler):
    """Counts records at ERROR and above."""

    def __init__(self):
        super().__init__(level=logging.ERROR)
        self.count = 0

    def emit(self, record):
        self.count += 1


def configure_logging(level: str) -> ErrorCountingHandler:
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)
    counter = ErrorCountingHandler()
    logging.getLogger().addHandler(counter)
    return counter


def code_version() -> str:
    """`git describe` of the source tree, or the package version."""
    try:
        out = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    return f"regimecast-{regimecast.__version__}"


def write_manifest(directory: Path, manifest: Dict):
    """Write manifest.json atomically (temporary file, then rename)."""
    tmp = directory / "manifest.json.tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    os.replace(tmp, directory / "manifest.json")


def _require_file(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file() or not os.access(p, os.R_OK):
        raise UsageError(f"{what} is not a readable file: {path}")
    return p


def _require_dir(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_dir() or not os.access(p, os.R_OK):
        raise UsageError(f"{what} is not a readable directory: {path}")
    return p


def _load_config(path: str) -> RunConfig:
    try:
        return RunConfig.from_json(_require_file(path, "config"))
    except (ValidationError, json.JSONDecodeError) as e:
        raise UsageError(f"invalid config {path}: {e}") from e


def _timing(started: float) -> Dict:
    finished = time.time()
    return {
        "started": dt.datetime.fromtimestamp(started, dt.timezone.utc).isoformat(),
        "finished": dt.datetime.fromtimestamp(finished, dt.timezone.utc).isoformat(),
        "elapsed_seconds": round(finished - started, 3),
    }


# ========================================
# COMMANDS
# ========================================

def cmd_simulate(args) -> None:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params = default_test_params()
    data, states = simulate_msvecm(params, args.periods, make_rng(args.seed))
    write_dataset(data, out / "data.csv")
    write_states(out / "states.csv", data.dates[params.P + 1:], states)
    logger.info("Simulated %d periods into %s (%d in regime 1)", data.T, out, int(states.sum()))


def cmd_estimate(args) -> None:
    started = time.time()
    config = _load_config(args.config)
    data_path = _require_file(args.data, "data")
    data = load_dataset(data_path, config.transforms, config.variables)

    out = Path(args.out)
    (out / "draws").mkdir(parents=True, exist_ok=True)
    config.to_json(out / "config.json")
    write_dataset(data, out / "data.csv")

    draws = run_chains(data, config.model_part(), args.seed, config.n_chains)
    draws.save(out / "draws")
    write_diagnostics(draws, out / "diagnostics.csv")

    manifest = {
        "command": "estimate",
        "config": config.model_dump(mode="json"),
        "seed": args.seed,
        "version": code_version(),
        "data": {"names": list(data.names), "first": data.dates[0], "last": data.dates[-1], "T": data.T},
        "n_retained": draws.n_draws,
        "notes": dict(sorted(draws.notes.items())),
        "timing": _timing(started),
    }
    write_manifest(out, manifest)
    check_run_directory(out)


def cmd_forecast(args) -> None:
    started = time.time()
    config = _load_config(args.config)
    store = VintageStore.load(_require_dir(args.vintages, "vintages"), config.transforms, config.variables)
    first = store.vintages[store.labels()[0]]
    try:
        config.target_index(first.names)
    except ValueError as e:
        raise UsageError(f"invalid config {args.config}: {e}") from e

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config.to_json(out / "config.json")
    report = run_recursive_exercise(store, config.forecast_models, config, seed=args.seed)
    report.write(out / "lps.csv", out / "lps_summary.json")

    manifest = {
        "command": "forecast",
        "config": config.model_dump(mode="json"),
        "seed": args.seed,
        "version": code_version(),
        "vintages": list(store.labels()),
        "origins": report.origins(),
        "timing": _timing(started),
    }
    write_manifest(out, manifest)
    logger.info("Scored %d origins; report in %s", len(report.origins()), out)


def cmd_report(args) -> None:
    run = _require_dir(args.run, "run")
    draws = PosteriorDraws.load(run / "draws")
    data = load_dataset(_require_file(str(run / "data.csv"), "run data"))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tables = {
        "regime_probabilities.csv": regime_probabilities(draws),
        "transition_probabilities.csv": transition_probability_paths(draws, data),
        "cointegration_errors.csv": cointegration_error_paths(draws, data),
        "tau_summary.csv": tau_summary(draws),
        "coefficient_distances.csv": coefficient_distance_summary(draws),
        "covariance_summary.csv": covariance_summary(draws),
    }
    for name, table in tables.items():
        table.to_csv(out / name, index=False, float_format="%.17g", lineterminator="\n")
    write_diagnostics(draws, out / "diagnostics.csv")
    logger.info("Wrote %d report tables to %s", len(tables) + 1, out)


def write_diagnostics(draws: PosteriorDraws, path: Path):
    """Diagnostics table; with too few draws an empty table and a warning."""
    if draws.n_draws < MIN_DRAWS:
        logger.warning("Only %d retained draws; diagnostics need %d", draws.n_draws, MIN_DRAWS)
        pd.DataFrame(columns=DIAGNOSTIC_COLUMNS).to_csv(path, index=False, lineterminator="\n")
        return
    compute_diagnostics(draws).to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


def check_run_directory(directory: Path) -> List[str]:
    """Log an error for every required run file that is missing."""
    missing = [name for name in RUN_FILES if not (directory / name).is_file()]
    if not list((directory / "draws").glob("*.csv")):
        missing.append("draws/*.csv")
    for name in missing:
        logger.error("Run directory %s is incomplete: %s missing", directory, name)
    return missing


# ========================================
# ENTRY POINT
# ========================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="regimecast", description="Markov-switching VECM estimation and forecasting")
    parser.add_argument("--log-level", default=Settings.LOG_LEVEL, help="logging level (default from REGIMECAST_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate the default fixture")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--periods", type=int, default=300)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="run the Gibbs sampler on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("forecast", help="recursive real-time forecast evaluation")
    p.add_argument("--vintages", required=True, help="directory of YYYYQq.csv vintages")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("report", help="posterior tables of an estimation run")
    p.add_argument("--run", required=True, help="run directory written by estimate")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    level = str(args.log_level).upper()
    if not isinstance(logging.getLevelName(level), int):
        parser.print_usage(sys.stderr)
        print(f"regimecast: error: unknown log level {args.log_level!r}", file=sys.stderr)
        return 2
    counter = configure_logging(level)
    if not Settings.validate():
        return 2

    try:
        args.func(args)
    except UsageError as e:
        logger.error("%s", e)
        return 2
    except RegimecastError as e:
        logger.error("%s failed: %s", args.command, e)
    return 0 if counter.count == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
