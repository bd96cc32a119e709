"""Metric records and their file formats.

A record summarizes one sampling window: the minimum and mean SINR over the
data receptions that decoded inside the window, the network-wide remaining
battery energy at the window's end, and the cumulative delivered-packet
count at the coordinator. Windows with no receptions carry absent SINR
fields, encoded as empty CSV cells, never as zero.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

FORMAT_VERSION = "wbansim-metrics-v1"
COLUMNS = ("time_s", "min_sinr_db", "avg_sinr_db", "energy_residue_j",
           "delivered", "scheme", "threshold_db", "seed")


@dataclass(frozen=True)
class MetricsRecord:
    time_s: float
    min_sinr_db: float | None
    avg_sinr_db: float | None
    energy_residue_j: float
    delivered: int
    scheme: str
    threshold_db: float
    seed: int

    def __post_init__(self):
        if (self.min_sinr_db is not None and self.avg_sinr_db is not None
                and self.min_sinr_db > self.avg_sinr_db + 1e-9):
            raise ValueError("window minimum cannot exceed its mean")


def compute_window_metrics(sinr_samples_db, energy_residue_j: float,
                           delivered: int, time_s: float, scheme: str = "iaa",
                           threshold_db: float = 0.0,
                           seed: int = 0) -> MetricsRecord:
    """Fold one window's reception SINRs and end-of-window counters into a
    record; an empty sample list leaves the SINR fields absent."""
    samples = list(sinr_samples_db)
    if samples:
        mn = min(samples)
        avg = sum(samples) / len(samples)
    else:
        mn = avg = None
    return MetricsRecord(time_s=time_s, min_sinr_db=mn, avg_sinr_db=avg,
                         energy_residue_j=energy_residue_j,
                         delivered=delivered, scheme=scheme,
                         threshold_db=threshold_db, seed=seed)


def windowed_records(frame_stats, window_s: float, scheme: str,
                     threshold_db: float, seed: int) -> list[MetricsRecord]:
    """Aggregate per-frame statistics onto a fixed time grid so runs with
    different seeds line up window-for-window.

    Within a window, each node's sensed-SINR samples average first; the
    window minimum is the worst node's average, and the window mean is the
    average over all samples.
    """
    if window_s <= 0:
        raise ValueError("window_s must be positive")
    records = []
    bucket: list = []
    window_idx = 0

    def flush(bucket, window_idx):
        end = (window_idx + 1) * window_s
        sums: dict[int, float] = {}
        cnts: dict[int, int] = {}
        for f in bucket:
            for n, s in f.delta_sum_by_node.items():
                sums[n] = sums.get(n, 0.0) + s
                cnts[n] = cnts.get(n, 0) + f.delta_cnt_by_node[n]
        node_avgs = [sums[n] / cnts[n] for n in sums if cnts[n]]
        total = sum(sums.values())
        count = sum(cnts.values())
        last = bucket[-1]
        return MetricsRecord(
            time_s=end,
            min_sinr_db=min(node_avgs) if node_avgs else None,
            avg_sinr_db=(total / count) if count else None,
            energy_residue_j=last.energy_residue_j,
            delivered=last.delivered_total,
            scheme=scheme, threshold_db=threshold_db, seed=seed)

    for f in frame_stats:
        while f.t_end > (window_idx + 1) * window_s and bucket:
            records.append(flush(bucket, window_idx))
            bucket = []
            window_idx += 1
        if f.t_end > (window_idx + 1) * window_s:
            window_idx = int(f.t_end // window_s)
        bucket.append(f)
    if bucket:
        records.append(flush(bucket, window_idx))
    return records


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_metrics_csv(records, path: str | Path) -> None:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write(f"# format: {FORMAT_VERSION}\n")
        writer = csv.writer(fh)
        writer.writerow(COLUMNS)
        for r in records:
            writer.writerow([_fmt(r.time_s), _fmt(r.min_sinr_db),
                             _fmt(r.avg_sinr_db), _fmt(r.energy_residue_j),
                             _fmt(r.delivered), r.scheme, _fmt(r.threshold_db),
                             _fmt(r.seed)])


def read_metrics_csv(path: str | Path) -> list[MetricsRecord]:
    path = Path(path)
    records = []
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("# format:"):
            raise ValueError(f"{path}: missing format header")
        version = first.split(":", 1)[1].strip()
        if version != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported format {version!r}")
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != COLUMNS:
            raise ValueError(f"{path}: unexpected columns {header}")
        for row in reader:
            records.append(MetricsRecord(
                time_s=float(row[0]),
                min_sinr_db=float(row[1]) if row[1] else None,
                avg_sinr_db=float(row[2]) if row[2] else None,
                energy_residue_j=float(row[3]),
                delivered=int(row[4]),
                scheme=row[5],
                threshold_db=float(row[6]),
                seed=int(row[7])))
    return records
