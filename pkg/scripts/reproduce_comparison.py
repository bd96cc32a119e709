#!/usr/bin/env python3
"""Run the three-scheme comparison grid and write per-run CSVs, an
across-seed summary, and a manifest.

The summary feeds the minimum-SINR-versus-time and energy-residue-versus-time
figures. Defaults match the headline experiment (50 simulated minutes,
20 seeds); trim with --seeds/--duration for a quick look.
"""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from wbansim.config import SimConfig
from wbansim.sweep import SweepSpec, run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/comparison")
    ap.add_argument("--seeds", type=int, default=20, help="number of seeds")
    ap.add_argument("--duration", type=float, default=3000.0)
    ap.add_argument("--threshold", type=float, default=None,
                    help="sensing threshold in dB (default: config default)")
    ap.add_argument("--workers", type=int, default=0)
    args = ap.parse_args()

    base = SimConfig(duration_s=args.duration)
    thr = args.threshold if args.threshold is not None else base.sinr_threshold_db
    spec = SweepSpec(schemes=["iaa", "or", "pc"], thresholds_db=[thr],
                     seeds=list(range(1, args.seeds + 1)),
                     out_dir=Path(args.out), base_config=base,
                     workers=args.workers)
    t0 = time.time()
    summary = run_sweep(spec)
    print(f"{summary}  ({time.time() - t0:.0f}s)")


if __name__ == "__main__":
    main()
