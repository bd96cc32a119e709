"""Render sweep-summary CSVs into the three comparison figures.

The input is the simulator's across-seed summary file (format header
``wbansim-metrics-v1-summary``); this package depends only on that documented
schema, never on the simulator itself. Rendering is deterministic: fixed
style, a pinned SVG hash salt, and no timestamps, so re-rendering the same
inputs reproduces the output byte for byte.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "wbanplots"
import matplotlib.pyplot as plt  # noqa: E402

SUMMARY_FORMAT = "wbansim-metrics-v1-summary"

KINDS = {
    "min_sinr_time": {
        "x": "Time (s)",
        "y": "WBAN minimum SINR (dB)",
        "title": "Minimum SINR versus time",
    },
    "avg_sinr_threshold": {
        "x": "SINR interference threshold (dB)",
        "y": "Average SINR (dB)",
        "title": "Average SINR versus interference threshold",
    },
    "energy_time": {
        "x": "Time (s)",
        "y": "WBAN energy residue (J)",
        "title": "Energy residue versus time",
    },
}

_STYLE = {
    "iaa": {"color": "#1f77b4", "linestyle": "-"},
    "or": {"color": "#d62728", "linestyle": "--"},
    "pc": {"color": "#2ca02c", "linestyle": "-."},
}


class PlotError(ValueError):
    pass


@dataclass(frozen=True)
class PlotSpec:
    input_csv: Path
    kind: str
    output: Path
    schemes: tuple[str, ...]

    def __post_init__(self):
        if self.kind not in KINDS:
            raise PlotError(f"unknown figure kind {self.kind!r}; "
                            f"expected one of {sorted(KINDS)}")
        if not self.schemes:
            raise PlotError("need at least one scheme to overlay")


def read_summary(path: Path) -> list[dict]:
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise PlotError(f"cannot open {path}: {exc}") from exc
    with fh:
        first = fh.readline()
        if not first.startswith("# format:"):
            raise PlotError(f"{path}: missing format header")
        version = first.split(":", 1)[1].strip()
        if version != SUMMARY_FORMAT:
            raise PlotError(f"{path}: unsupported format {version!r}")
        reader = csv.DictReader(fh)
        rows = []
        for raw in reader:
            row = dict(raw)
            for key, value in row.items():
                if key != "scheme":
                    row[key] = float(value) if value not in ("", None) else None
            rows.append(row)
    if not rows:
        raise PlotError(f"{path}: no data rows")
    return rows


def _require(rows: list[dict], columns: tuple[str, ...]) -> None:
    missing = [c for c in columns if c not in rows[0]]
    if missing:
        raise PlotError(f"summary is missing columns: {missing}")


def _series_time(rows, scheme, ycol):
    pts = sorted((r["time_s"], r[ycol]) for r in rows
                 if r["scheme"] == scheme and r[ycol] is not None)
    return [p[0] for p in pts], [p[1] for p in pts]


def _series_threshold(rows, scheme):
    # Collapse the time axis: one point per threshold, averaging the
    # per-window means over the run.
    by_thr: dict[float, list[float]] = {}
    for r in rows:
        if r["scheme"] == scheme and r["avg_sinr_db_mean"] is not None:
            by_thr.setdefault(r["threshold_db"], []).append(r["avg_sinr_db_mean"])
    thresholds = sorted(by_thr)
    return thresholds, [sum(by_thr[t]) / len(by_thr[t]) for t in thresholds]


def render(spec: PlotSpec) -> Path:
    rows = read_summary(Path(spec.input_csv))
    present = {r["scheme"] for r in rows}
    missing = [s for s in spec.schemes if s not in present]
    if missing:
        raise PlotError(f"schemes {missing} not present in summary "
                        f"(found {sorted(present)})")

    axes_meta = KINDS[spec.kind]
    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=120)
    try:
        for scheme in spec.schemes:
            style = _STYLE.get(scheme, {})
            if spec.kind == "min_sinr_time":
                _require(rows, ("time_s", "min_sinr_db_mean"))
                xs, ys = _series_time(rows, scheme, "min_sinr_db_mean")
            elif spec.kind == "energy_time":
                _require(rows, ("time_s", "energy_residue_j_median"))
                xs, ys = _series_time(rows, scheme, "energy_residue_j_median")
            else:
                _require(rows, ("threshold_db", "avg_sinr_db_mean"))
                xs, ys = _series_threshold(rows, scheme)
            if not xs:
                raise PlotError(f"no plottable data for scheme {scheme!r}")
            ax.plot(xs, ys, label=scheme.upper(), linewidth=1.6, **style)
        ax.set_xlabel(axes_meta["x"])
        ax.set_ylabel(axes_meta["y"])
        ax.set_title(axes_meta["title"])
        ax.grid(True, alpha=0.3)
        ax.legend()
        fig.tight_layout()
        out = Path(spec.output)
        out.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out, metadata=_deterministic_metadata(out.suffix))
    finally:
        plt.close(fig)
    return out


def _deterministic_metadata(suffix: str) -> dict | None:
    if suffix.lower() == ".svg":
        return {"Date": None}
    if suffix.lower() == ".png":
        return {"Software": "wbanplots"}
    return None
