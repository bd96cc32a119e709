"""Command-line interface.

    wbansim simulate --scheme iaa --seed 1 --out results/
    wbansim sweep --spec sweep.cfg
    wbansim analyze outage --dist uniform:2 --n 12 --thresholds 1.0 --trials 100000

Exit codes: 0 on success, 2 on configuration/validation errors, 1 on
runtime failures. WBANSIM_OUT sets the default output directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, SimConfig, load_config
from .engine import InvariantViolation, SimulationError, run
from .metrics import windowed_records, write_metrics_csv
from .outage import verify_lemma1
from .sweep import parse_sweep_text, run_csv_name, run_sweep


def _default_out() -> str:
    return os.environ.get("WBANSIM_OUT", ".")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wbansim")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one simulation and write its metrics CSV")
    sim.add_argument("--config", help="key = value config file")
    sim.add_argument("--scheme", choices=("iaa", "or", "pc"))
    sim.add_argument("--seed", type=int)
    sim.add_argument("--threshold", type=float, help="sensing threshold in dB")
    sim.add_argument("--duration", type=float, help="simulated seconds")
    sim.add_argument("--out", default=_default_out(), help="output directory")
    sim.add_argument("--trace", action="store_true", help="also write a JSONL trace")

    swp = sub.add_parser("sweep", help="run a scheme/threshold/seed grid")
    swp.add_argument("--spec", required=True, help="sweep spec file")
    swp.add_argument("--out", help="override the spec's output directory")

    ana = sub.add_parser("analyze", help="analysis utilities")
    ana_sub = ana.add_subparsers(dest="analysis", required=True)
    out_p = ana_sub.add_parser("outage", help="policy-vs-raw outage comparison")
    out_p.add_argument("--dist", default="uniform:2",
                       help="distribution spec (uniform[:scale], texp[:m[:cap]], "
                            "twopoint[:lo:hi:p])")
    out_p.add_argument("--n", type=int, default=12, help="network size N")
    out_p.add_argument("--thresholds", default="1.0",
                       help="comma-separated linear thresholds")
    out_p.add_argument("--trials", type=int, default=100_000)
    out_p.add_argument("--seed", type=int, default=1)
    out_p.add_argument("--out", default="-", help="CSV path or - for stdout")
    return parser


def _cmd_simulate(args) -> int:
    cfg = SimConfig()
    if args.config:
        cfg = load_config(args.config, base=cfg)
    overrides = {}
    if args.scheme:
        overrides["scheme"] = args.scheme
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.threshold is not None:
        overrides["sinr_threshold_db"] = args.threshold
    if args.duration is not None:
        overrides["duration_s"] = args.duration
    if args.trace:
        overrides["trace_enabled"] = True
    cfg = cfg.replace(**overrides)
    cfg.validate()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = run(cfg)
    records = windowed_records(result.frame_stats, cfg.metrics_window_s,
                               cfg.scheme, cfg.sinr_threshold_db, cfg.seed)
    csv_path = out / run_csv_name(cfg.scheme, cfg.sinr_threshold_db, cfg.seed)
    write_metrics_csv(records, csv_path)
    if cfg.trace_enabled:
        trace_path = csv_path.with_suffix(".trace.jsonl")
        with open(trace_path, "w") as fh:
            for event in result.trace:
                fh.write(json.dumps(event, sort_keys=True) + "\n")
    print(f"{csv_path}  frames={result.frames_run} "
          f"delivered={result.delivered_total}")
    return 0


def _cmd_sweep(args) -> int:
    spec = parse_sweep_text(Path(args.spec).read_text(), out_dir=args.out)
    summary = run_sweep(spec)
    print(summary)
    return 0


def _cmd_analyze_outage(args) -> int:
    thresholds = [float(x) for x in args.thresholds.split(",") if x.strip()]
    if not thresholds:
        raise ConfigError("need at least one threshold")
    rows = []
    for thr in thresholds:
        rng = np.random.default_rng([args.seed, int(abs(thr * 1e6))])
        check = verify_lemma1(args.dist, args.n, thr, args.trials, rng)
        rows.append((thr, check.p_out, check.p_pr,
                     check.ci_out[0], check.ci_out[1],
                     check.ci_pr[0], check.ci_pr[1],
                     int(check.holds), int(check.strict)))
    header = ("threshold", "p_out", "p_pr", "p_out_ci_lo", "p_out_ci_hi",
              "p_pr_ci_lo", "p_pr_ci_hi", "holds", "strict")
    if args.out == "-":
        writer = csv.writer(sys.stdout)
        writer.writerow(header)
        writer.writerows(rows)
    else:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
        print(args.out)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "analyze" and args.analysis == "outage":
            return _cmd_analyze_outage(args)
        parser.error("unknown command")
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SimulationError, InvariantViolation, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
