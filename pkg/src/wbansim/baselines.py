"""Single-channel comparison schemes: opportunistic relaying (OR) and
relay-assisted transmission with per-node power control (PC).

Both run plain slotted CSMA/CA with binary exponential backoff on the base
channel; neither extends contention windows on interference nor touches any
reserved channel. PC additionally steps each node's transmit power toward a
target reception SINR, within hard bounds.
"""

from __future__ import annotations

from dataclasses import dataclass

from .mac import Packet


@dataclass(frozen=True, slots=True)
class OrState:
    node_id: int
    cw: int = 8
    backoff_counter: int = 0
    attempts: int = 0
    done: bool = False
    gave_up: bool = False
    pending_message: Packet | None = None


@dataclass(frozen=True, slots=True)
class PcState:
    """OR contention state plus the node's current transmit power level."""
    base: OrState
    power_dbm: float = 0.0


def or_relay_select(candidates: list[tuple[int, float]]) -> int | None:
    """Best relay by instantaneous SINR; ties go to the lowest relay id.

    An empty candidate list means no relay can be reached this frame, which
    callers treat as a no-transmission outcome.
    """
    if not candidates:
        return None
    best_id, best_sinr = candidates[0]
    for relay_id, sinr in candidates[1:]:
        if sinr > best_sinr or (sinr == best_sinr and relay_id < best_id):
            best_id, best_sinr = relay_id, sinr
    return best_id


def pc_power_update(current_dbm: float, measured_sinr_db: float,
                    target_sinr_db: float, step_db: float,
                    bounds: tuple[float, float],
                    hysteresis_db: float = 2.0) -> float:
    """Fixed-step power tracking of a target SINR with a hysteresis band.

    Below target: step up. More than `hysteresis_db` above target: step down.
    Inside the band: hold. Always clamped to `bounds`.
    """
    lo, hi = bounds
    if hi < lo:
        raise ValueError(f"invalid power bounds ({lo}, {hi})")
    if measured_sinr_db < target_sinr_db:
        new = current_dbm + step_db
    elif measured_sinr_db > target_sinr_db + hysteresis_db:
        new = current_dbm - step_db
    else:
        new = current_dbm
    return min(hi, max(lo, new))
