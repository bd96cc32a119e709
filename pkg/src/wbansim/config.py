"""Simulation configuration: defaults, file loading, validation.

Config files are flat ``key = value`` text; ``#`` starts a comment. Every
field of :class:`SimConfig` is addressable by name, and CLI flags override
file values.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

SCHEMES = ("iaa", "or", "pc")


class ConfigError(ValueError):
    """Raised when a config file or config value is invalid."""


@dataclass
class SimConfig:
    # Run control
    duration_s: float = 3000.0        # 50 minutes
    scheme: str = "iaa"
    seed: int = 1
    trace_enabled: bool = False
    check_invariants: bool = False

    # Topology
    n_sources: int = 12
    n_relays: int = 4
    area_x_m: float = 2.0
    area_y_m: float = 2.0
    positions_file: str = ""          # optional "id x y" lines; overrides layout

    # PHY
    tx_power_dbm: float = 0.0
    noise_dbm: float = -100.0
    data_rate_bps: float = 250_000.0
    packet_bytes: int = 12
    path_loss_exponent: float = 4.22
    reference_loss_db: float = 40.0
    reference_distance_m: float = 1.0
    shadowing_sigma_db: float = 0.0   # log-normal shadowing, off by default
    capture_threshold_db: float = 10.0

    # MAC / interference classification
    sinr_threshold_db: float = -45.0  # carrier-sense clearance threshold
    cw_min_slots: int = 8
    cw_max_slots: int = 128
    backoff_slot_s: float = 0.00032
    max_retries: int = 4
    q_threshold: int = 2
    jam_slots: int = 1
    cca_busy_dbm: float = -70.0       # energy-detect CCA for baseline schemes

    # Superframe timing. Contention settles within the first few dozen
    # backoff slots of each period, so the period lengths set the frame rate
    # (and with it load and simulation cost) without changing the per-frame
    # contention dynamics.
    beacon_s: float = 0.001
    cap1a_s: float = 0.200
    cap1b_s: float = 0.100
    cap2_s: float = 0.150
    tdma_slot_s: float = 0.002
    baseline_relay_slots: int = 6     # relay-period length for or/pc, in TDMA slots
    activity_window_frames: int = 3

    # Traffic
    p_traffic: float = 1.0            # per-source per-frame arrival probability

    # Energy model (CC2420-class draws)
    initial_energy_j: float = 200.0
    tx_draw_w: float = 0.0522
    rx_draw_w: float = 0.0564
    listen_draw_w: float = 0.0564
    idle_draw_w: float = 0.00128
    sleep_draw_w: float = 0.00006
    pc_circuitry_floor_w: float = 0.030  # tx draw scales with power above this floor

    # Power-control baseline
    pc_target_sinr_db: float = 16.0
    pc_hysteresis_db: float = 2.0
    pc_step_db: float = 1.0
    pc_min_dbm: float = -20.0
    pc_max_dbm: float = 0.0

    # Metrics
    metrics_window_s: float = 30.0

    def validate(self) -> None:
        """Raise ConfigError naming the first offending field."""
        positive = [
            "duration_s", "area_x_m", "area_y_m", "data_rate_bps",
            "reference_distance_m", "path_loss_exponent", "backoff_slot_s",
            "beacon_s", "cap1a_s", "cap1b_s", "cap2_s", "tdma_slot_s",
            "initial_energy_j", "metrics_window_s",
        ]
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)!r}")
        at_least_one = ["n_sources", "n_relays", "packet_bytes", "cw_min_slots",
                        "cw_max_slots", "max_retries", "baseline_relay_slots",
                        "activity_window_frames", "jam_slots"]
        for name in at_least_one:
            if not getattr(self, name) >= 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)!r}")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not 0.0 <= self.p_traffic <= 1.0:
            raise ConfigError(f"p_traffic must be in [0, 1], got {self.p_traffic!r}")
        if self.cw_max_slots < self.cw_min_slots:
            raise ConfigError("cw_max_slots must be >= cw_min_slots")
        if self.pc_max_dbm < self.pc_min_dbm:
            raise ConfigError("pc_max_dbm must be >= pc_min_dbm")
        if self.q_threshold < 0:
            raise ConfigError(f"q_threshold must be >= 0, got {self.q_threshold!r}")
        frame_floor = self.beacon_s + self.cap1a_s + self.cap1b_s + self.cap2_s
        if frame_floor <= 0:
            raise ConfigError("total frame length must be > 0")

    @property
    def packet_airtime_s(self) -> float:
        return self.packet_bytes * 8 / self.data_rate_bps

    def replace(self, **kwargs) -> "SimConfig":
        return dataclasses.replace(self, **kwargs)


_FIELD_TYPES = {f.name: f.type for f in fields(SimConfig)}


def _coerce(name: str, raw: str):
    typ = _FIELD_TYPES[name]
    raw = raw.strip()
    if typ in ("bool", bool):
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name}: cannot parse {raw!r} as bool")
    if typ in ("int", int):
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"{name}: cannot parse {raw!r} as int") from exc
    if typ in ("float", float):
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"{name}: cannot parse {raw!r} as float") from exc
    return raw


def parse_config_text(text: str, base: SimConfig | None = None) -> SimConfig:
    """Parse ``key = value`` lines into a SimConfig, starting from `base`."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        values[key] = _coerce(key, raw)
    cfg = dataclasses.replace(base, **values) if base else SimConfig(**values)
    return cfg


def load_config(path: str | Path, base: SimConfig | None = None) -> SimConfig:
    return parse_config_text(Path(path).read_text(), base=base)


def config_to_dict(cfg: SimConfig) -> dict:
    return dataclasses.asdict(cfg)
