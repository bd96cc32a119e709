"""Sweep orchestration: run a (scheme x threshold x seed) grid, write one
CSV per run plus an across-seed summary and a reproducibility manifest.

Runs execute in parallel across engine instances; outputs merge
deterministically by sorting on (scheme, threshold, seed), so a sweep's
files are byte-identical no matter the worker count.
"""

from __future__ import annotations

import csv
import json
import multiprocessing
import statistics
import subprocess
from dataclasses import dataclass, field
from pathlib import Path

from .config import SCHEMES, ConfigError, SimConfig, config_to_dict, parse_config_text
from .engine import run
from .metrics import (FORMAT_VERSION, MetricsRecord, read_metrics_csv,
                      windowed_records, write_metrics_csv)

SUMMARY_COLUMNS = (
    "scheme", "threshold_db", "time_s", "n_seeds",
    "min_sinr_db_mean", "min_sinr_db_std",
    "avg_sinr_db_mean", "avg_sinr_db_std",
    "energy_residue_j_mean", "energy_residue_j_std", "energy_residue_j_median",
    "delivered_mean", "delivered_std",
)


@dataclass
class SweepSpec:
    schemes: list[str]
    thresholds_db: list[float]
    seeds: list[int]
    out_dir: Path
    base_config: SimConfig = field(default_factory=SimConfig)
    workers: int = 0            # 0: one per CPU

    def validate(self) -> None:
        if not self.schemes or not self.thresholds_db or not self.seeds:
            raise ConfigError("schemes, thresholds_db and seeds must be nonempty")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ConfigError(f"unknown scheme {s!r}")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be unique")


_SWEEP_KEYS = ("schemes", "thresholds_db", "seeds", "out", "workers")


def parse_sweep_text(text: str, out_dir: str | None = None) -> SweepSpec:
    """Sweep specs reuse the key = value format; unknown keys fall through
    to the base simulation config."""
    sweep_vals: dict = {}
    config_lines = []
    for line in text.splitlines():
        stripped = line.split("#", 1)[0].strip()
        if not stripped or "=" not in stripped:
            config_lines.append(line)
            continue
        key, raw = (p.strip() for p in stripped.split("=", 1))
        if key in _SWEEP_KEYS:
            sweep_vals[key] = raw
        else:
            config_lines.append(line)
    base = parse_config_text("\n".join(config_lines))
    if "schemes" not in sweep_vals:
        raise ConfigError("sweep spec needs a 'schemes' line")
    schemes = [s.strip() for s in sweep_vals["schemes"].split(",") if s.strip()]
    thresholds = [float(x) for x in
                  sweep_vals.get("thresholds_db", str(base.sinr_threshold_db)).split(",")]
    seeds = _parse_seeds(sweep_vals.get("seeds", str(base.seed)))
    out = Path(out_dir or sweep_vals.get("out", "sweep_out"))
    workers = int(sweep_vals.get("workers", "0"))
    return SweepSpec(schemes=schemes, thresholds_db=thresholds, seeds=seeds,
                     out_dir=out, base_config=base, workers=workers)


def _parse_seeds(raw: str) -> list[int]:
    seeds = []
    for part in raw.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        elif part:
            seeds.append(int(part))
    return seeds


def run_csv_name(scheme: str, threshold_db: float, seed: int) -> str:
    return f"run_{scheme}_thr{threshold_db:+.1f}_seed{seed}.csv"


def _run_one(args) -> str:
    cfg, out_dir = args
    result = run(cfg)
    records = windowed_records(result.frame_stats, cfg.metrics_window_s,
                               cfg.scheme, cfg.sinr_threshold_db, cfg.seed)
    name = run_csv_name(cfg.scheme, cfg.sinr_threshold_db, cfg.seed)
    write_metrics_csv(records, Path(out_dir) / name)
    return name


def run_sweep(spec: SweepSpec) -> Path:
    """Execute the grid; returns the summary CSV path. Partial outputs are
    removed if any run fails."""
    spec.validate()
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = []
    for scheme in spec.schemes:
        for thr in spec.thresholds_db:
            for seed in spec.seeds:
                cfg = spec.base_config.replace(
                    scheme=scheme, sinr_threshold_db=thr, seed=seed)
                cfg.validate()
                jobs.append((cfg, str(out)))
    written: list[Path] = []
    workers = spec.workers or multiprocessing.cpu_count()
    try:
        if workers > 1 and len(jobs) > 1:
            with multiprocessing.Pool(workers) as pool:
                for name in pool.imap_unordered(_run_one, jobs):
                    written.append(out / name)
        else:
            for job in jobs:
                written.append(out / _run_one(job))
        summary = write_summary(spec, out)
        manifest = _write_manifest(spec, out, sorted(p.name for p in written))
        return summary
    except Exception:
        for p in written:
            p.unlink(missing_ok=True)
        raise


def write_summary(spec: SweepSpec, out: Path) -> Path:
    """Across-seed aggregation keyed (scheme, threshold, window time)."""
    rows = []
    for scheme in sorted(spec.schemes):
        for thr in sorted(spec.thresholds_db):
            per_seed = [read_metrics_csv(out / run_csv_name(scheme, thr, seed))
                        for seed in sorted(spec.seeds)]
            by_time: dict[float, list[MetricsRecord]] = {}
            for records in per_seed:
                for r in records:
                    by_time.setdefault(r.time_s, []).append(r)
            for t in sorted(by_time):
                recs = by_time[t]
                mins = [r.min_sinr_db for r in recs if r.min_sinr_db is not None]
                avgs = [r.avg_sinr_db for r in recs if r.avg_sinr_db is not None]
                energies = [r.energy_residue_j for r in recs]
                delivered = [r.delivered for r in recs]
                rows.append((
                    scheme, thr, t, len(recs),
                    _mean(mins), _std(mins), _mean(avgs), _std(avgs),
                    _mean(energies), _std(energies),
                    statistics.median(energies) if energies else None,
                    _mean([float(d) for d in delivered]),
                    _std([float(d) for d in delivered])))
    path = out / "summary.csv"
    with open(path, "w", newline="") as fh:
        fh.write(f"# format: {FORMAT_VERSION}-summary\n")
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for row in rows:
            writer.writerow(["" if v is None
                             else (repr(v) if isinstance(v, float) else str(v))
                             for v in row])
    return path


def read_summary_csv(path: str | Path) -> list[dict]:
    rows = []
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("# format:"):
            raise ValueError(f"{path}: missing format header")
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != SUMMARY_COLUMNS:
            raise ValueError(f"{path}: unexpected summary columns")
        for raw in reader:
            row = dict(zip(header, raw))
            for key in header:
                if key == "scheme":
                    continue
                row[key] = float(row[key]) if row[key] != "" else None
            rows.append(row)
    return rows


def _mean(vals) -> float | None:
    return statistics.fmean(vals) if vals else None


def _std(vals) -> float | None:
    if not vals:
        return None
    if len(vals) < 2:
        return 0.0
    return statistics.stdev(vals)


def git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"],
                             capture_output=True, text=True, timeout=10)
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


def _write_manifest(spec: SweepSpec, out: Path, files: list[str]) -> Path:
    manifest = {
        "format": f"{FORMAT_VERSION}-manifest",
        "git": git_describe(),
        "schemes": sorted(spec.schemes),
        "thresholds_db": sorted(spec.thresholds_db),
        "seeds": sorted(spec.seeds),
        "config": config_to_dict(spec.base_config),
        "files": files,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path
