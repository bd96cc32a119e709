#!/usr/bin/env python3
"""Sweep the sensing threshold from -60 to -40 dB for the avoidance scheme
and plain opportunistic relaying; the summary feeds the
average-SINR-versus-threshold figure."""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from wbansim.config import SimConfig
from wbansim.sweep import SweepSpec, run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/threshold_sweep")
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--duration", type=float, default=600.0)
    ap.add_argument("--thresholds", default="-60,-55,-50,-45,-40")
    ap.add_argument("--workers", type=int, default=0)
    args = ap.parse_args()

    spec = SweepSpec(
        schemes=["iaa", "or"],
        thresholds_db=[float(x) for x in args.thresholds.split(",")],
        seeds=list(range(1, args.seeds + 1)),
        out_dir=Path(args.out),
        base_config=SimConfig(duration_s=args.duration),
        workers=args.workers)
    t0 = time.time()
    summary = run_sweep(spec)
    print(f"{summary}  ({time.time() - t0:.0f}s)")


if __name__ == "__main__":
    main()
