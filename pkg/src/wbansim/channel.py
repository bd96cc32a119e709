"""Physical-layer model: positions, log-distance path loss, SINR, and
per-channel transmitter bookkeeping.

All SINR arithmetic happens in linear milliwatts; dB appears only at API
boundaries. Distances below the reference distance clamp to the reference
distance, since on-body separations in a small area routinely fall under 1 m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

_LN10_OVER_10 = math.log(10.0) / 10.0


def dbm_to_mw(dbm: float) -> float:
    return math.exp(dbm * _LN10_OVER_10)


def mw_to_dbm(mw: float) -> float:
    return 10.0 * math.log10(mw)


@dataclass(frozen=True, slots=True)
class NodePosition:
    node_id: int
    x: float
    y: float

    def distance_to(self, other: "NodePosition") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True, slots=True)
class PathLossModel:
    """Log-distance path loss: PL(d) = PL(d0) + 10*alpha*log10(d/d0)."""

    exponent_alpha: float = 4.22
    reference_loss_db: float = 40.0
    reference_distance_m: float = 1.0

    def __post_init__(self):
        if not self.exponent_alpha > 0:
            raise ValueError(f"exponent_alpha must be > 0, got {self.exponent_alpha}")
        if not self.reference_distance_m > 0:
            raise ValueError(
                f"reference_distance_m must be > 0, got {self.reference_distance_m}")


@dataclass(frozen=True, slots=True)
class ChannelId:
    """Either the shared base channel or one orthogonal reserved channel.

    Reserved channels are identified by index; the per-relay reserved sets
    are pairwise disjoint, so one index maps to exactly one relay.
    """

    kind: str            # "base" | "reserved"
    index: int | None = None

    def __post_init__(self):
        if self.kind not in ("base", "reserved"):
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if self.kind == "reserved" and (self.index is None or self.index < 0):
            raise ValueError("reserved channel requires a nonnegative index")
        if self.kind == "base" and self.index is not None:
            raise ValueError("base channel carries no index")

    @property
    def is_base(self) -> bool:
        return self.kind == "base"


BASE_CHANNEL = ChannelId("base")


def reserved_channel(index: int) -> ChannelId:
    return ChannelId("reserved", index)


@dataclass(slots=True)
class SinrSample:
    value_db: float
    measured_at: float
    channel: ChannelId
    measuring_node: int

    def __post_init__(self):
        if not math.isfinite(self.value_db):
            raise ValueError(f"SINR sample must be finite, got {self.value_db}")


def path_loss_db(model: PathLossModel, distance_m: float) -> float:
    """Path loss in dB at `distance_m`; distances under the reference clamp up."""
    if not math.isfinite(distance_m):
        raise ValueError(f"distance must be finite, got {distance_m}")
    d = max(distance_m, model.reference_distance_m)
    return model.reference_loss_db + 10.0 * model.exponent_alpha * math.log10(
        d / model.reference_distance_m)


def received_power_dbm(tx_power_dbm: float, model: PathLossModel,
                       distance_m: float) -> float:
    return tx_power_dbm - path_loss_db(model, distance_m)


def compute_sinr(desired_rx_dbm: float, interferer_rx_dbm: list[float],
                 noise_dbm: float) -> float:
    """SINR in dB: desired power over summed interference plus noise.

    With an empty interferer list the denominator is the noise floor alone,
    which bounds the ratio away from infinity.
    """
    if not math.isfinite(noise_dbm):
        raise ValueError(f"noise floor must be finite, got {noise_dbm}")
    denom_mw = dbm_to_mw(noise_dbm)
    for dbm in interferer_rx_dbm:
        denom_mw += dbm_to_mw(dbm)
    return mw_to_dbm(dbm_to_mw(desired_rx_dbm) / denom_mw)


def sinr_linear(desired_mw: float, interference_mw: float, noise_mw: float) -> float:
    """Linear-domain SINR for hot-path callers that avoid dB round trips."""
    return desired_mw / (interference_mw + noise_mw)


@dataclass(slots=True)
class Transmission:
    node_id: int
    channel: ChannelId
    start_s: float
    end_s: float

    def active_at(self, t: float) -> bool:
        return self.start_s <= t < self.end_s


@dataclass
class ChannelEnvironment:
    """Registry of transmissions, queried for the interferer set on a channel.

    Owned by one engine instance; a node may hold at most one live
    transmission at a time, which keeps distinct channels disjoint.
    """

    transmissions: list[Transmission] = field(default_factory=list)

    def register(self, node_id: int, channel: ChannelId, start_s: float,
                 end_s: float, validate: bool = True,
                 _eps: float = 1e-9) -> Transmission:
        if end_s <= start_s:
            raise ValueError("transmission interval must have positive length")
        if validate:
            for tx in self.transmissions:
                # Boundary-touching intervals are legal; ulp noise is not overlap.
                if (tx.node_id == node_id and tx.start_s < end_s - _eps
                        and start_s < tx.end_s - _eps):
                    raise ValueError(
                        f"node {node_id} already transmitting in "
                        f"[{tx.start_s}, {tx.end_s})")
        tx = Transmission(node_id, channel, start_s, end_s)
        self.transmissions.append(tx)
        return tx

    def truncate(self, tx: Transmission, end_s: float) -> None:
        """Shorten a live transmission (jam abort)."""
        if end_s < tx.start_s:
            raise ValueError("cannot truncate before transmission start")
        tx.end_s = end_s

    def active_transmitters(self, channel: ChannelId, at: float) -> set[int]:
        return {tx.node_id for tx in self.transmissions
                if tx.channel == channel and tx.active_at(at)}

    def prune(self, before_s: float) -> None:
        """Drop transmissions that ended before `before_s` (per-frame cleanup)."""
        self.transmissions = [tx for tx in self.transmissions if tx.end_s > before_s]


def active_transmitters(env: ChannelEnvironment, channel: ChannelId,
                        at: float) -> set[int]:
    return env.active_transmitters(channel, at)


class GainTable:
    """Precomputed linear path gains between every node pair.

    gain[a][b] is the received power in mW at b for a 0 dBm transmission
    from a, so received_mw = tx_mw * gain[a][b]. Symmetric by construction.
    """

    def __init__(self, positions: dict[int, NodePosition], model: PathLossModel):
        self.model = model
        ids = sorted(positions)
        self.gain: dict[int, dict[int, float]] = {i: {} for i in ids}
        for i in ids:
            for j in ids:
                if i == j:
                    continue
                loss = path_loss_db(model, positions[i].distance_to(positions[j]))
                self.gain[i][j] = dbm_to_mw(-loss)

    def rx_mw(self, tx_mw: float, src: int, dst: int) -> float:
        return tx_mw * self.gain[src][dst]
