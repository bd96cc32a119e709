#!/usr/bin/env python3
"""Compare the raw and policy-weighted outage probabilities over a threshold
sweep and several contribution distributions; writes one CSV per family."""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from wbansim.cli import main as cli_main


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/outage")
    ap.add_argument("--n", type=int, default=12)
    ap.add_argument("--trials", type=int, default=100_000)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for spec in ("uniform:2", "texp:1.2:1", "twopoint:0.5:1.8:0.6"):
        name = spec.replace(":", "_") + ".csv"
        code = cli_main(["analyze", "outage", "--dist", spec,
                         "--n", str(args.n), "--trials", str(args.trials),
                         "--thresholds", "0.5,0.75,1.0,1.5,2.0",
                         "--out", str(out / name)])
        if code != 0:
            sys.exit(code)


if __name__ == "__main__":
    main()
