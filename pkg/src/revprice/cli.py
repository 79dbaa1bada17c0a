"""Command-line front end.

    revprice simulate --config scenario.cfg --out horizon.csv
    revprice sweep    --config scenario.cfg --out sweep.csv
    revprice validate --config scenario.cfg

Exit codes: 0 success, 1 validation failure, 2 config error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from .config import ConfigError, ScenarioConfig, load_config
from .montecarlo import SlotMetrics, SweepPoint, run_horizon, run_pmin_sweep
from .validation import run_validation

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_IO = 3

SIMULATE_HEADER = ["slot", "scheme", "avg_demand", "avg_revenue", "avg_payoff", "avg_utilization", "admission_warning"]
SWEEP_HEADER = ["ratio", "scheme", "avg_demand", "avg_revenue", "avg_payoff", "avg_utilization"]

def fmt(value: float) -> str:
    return format(value, ".12g")


def _metric_cells(m: SlotMetrics) -> List[str]:
    return [fmt(m.avg_demand), fmt(m.avg_revenue), fmt(m.avg_payoff), fmt(m.avg_utilization)]


def simulation_csv(rows: Sequence[SlotMetrics]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SIMULATE_HEADER)
    for m in rows:
        writer.writerow([m.slot, m.scheme.value, *_metric_cells(m), int(m.admission_warning)])
    return buf.getvalue()


def sweep_csv(points: Sequence[SweepPoint]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_HEADER)
    for point in points:
        for m in (point.forward, point.reverse):
            writer.writerow([fmt(point.ratio), m.scheme.value, *_metric_cells(m)])
    return buf.getvalue()


def simulate(config: ScenarioConfig, workers: int = 1) -> str:
    rows = run_horizon(
        config.market(),
        config.demand_model(),
        p_min_policy=config.p_min_policy,
        num_realizations=config.num_realizations,
        seed=config.master_seed,
        workers=workers,
    )
    return simulation_csv(rows)


def sweep(config: ScenarioConfig, workers: int = 1) -> str:
    if config.sweep_slot is None:
        raise ConfigError("sweep needs 'sweep_slot'", "sweep_slot")
    if config.sweep_ratios is None:
        raise ConfigError("sweep needs 'sweep_ratios'", "sweep_ratios")
    points = run_pmin_sweep(
        config.market(),
        config.demand_model(),
        config.sweep_slot,
        config.sweep_ratios,
        num_realizations=config.num_realizations,
        seed=config.master_seed,
        workers=workers,
    )
    return sweep_csv(points)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="revprice", description="Forward vs. reverse pricing simulator.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, needs_out in (("simulate", True), ("sweep", True), ("validate", False)):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path, help="scenario file (key = value lines)")
        if needs_out:
            p.add_argument("--out", required=True, type=Path, help="CSV output path")
        p.add_argument("--seed", type=int, default=None, help="override master_seed")
        p.add_argument("--workers", type=int, default=1, help="threads for realizations (results are identical)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0 or args.seed >= 2**64:
                raise ConfigError("--seed must be an unsigned 64-bit integer", "master_seed")
            config = config.with_seed(args.seed)
        if args.command == "validate":
            results = run_validation(config)
            for result in results:
                print(result.line())
            return EXIT_OK if all(r.passed for r in results) else EXIT_VALIDATION
        text = simulate(config, args.workers) if args.command == "simulate" else sweep(config, args.workers)
        args.out.write_text(text)
    except ConfigError as exc:
        key = f" [{exc.key}]" if exc.key else ""
        print(f"config error{key}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc.filename or ''}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
