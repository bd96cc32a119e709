"""Interference-avoiding MAC: source, relay and coordinator state machines.

The step functions are pure: (state, event) -> (new state, action). The
engine owns all randomness and timing; drawn backoffs and measured SINR
samples arrive inside the events, and the returned action tells the engine
what to do on the air.

A source resolves each frame into exactly one of four outcomes:
  case 1 - first sense clean, transmit on the base channel early;
  case 2 - first sense dirty, double the contention window, transmit on the
           base channel after the extended backoff if the retry sense is clean;
  case 3 - retry sense dirty too, switch to a reserved channel and contend
           there; repeated dirty senses there increment a failure counter;
  deferred - the failure counter passed its threshold (or the frame ran out),
           so the source returns to the base channel and sleeps until the
           next frame, carrying its packet.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

from .channel import BASE_CHANNEL, ChannelId, SinrSample
from .superframe import ActivityTracker, Superframe, build_superframe, update_activity


class ProtocolError(RuntimeError):
    """Event/phase mismatch: a simulator bug, never silently ignored."""


# ---------------------------------------------------------------------------
# Source FSM


class SourcePhase(enum.Enum):
    IDLE = "idle"
    SENSING_CAP1A = "sensing_cap1a"
    CW_EXTENDED = "cw_extended"
    SENSING_CAP1B = "sensing_cap1b"
    SWITCHED_RESERVED = "switched_reserved"
    SENSING_CAP2 = "sensing_cap2"
    TX_DONE = "tx_done"
    DEFERRED = "deferred"


@dataclass(frozen=True, slots=True)
class Packet:
    source_id: int
    created_frame: int
    carried: bool = False


@dataclass(slots=True)
class SourceState:
    node_id: int
    phase: SourcePhase = SourcePhase.IDLE
    channel: ChannelId = BASE_CHANNEL
    cw: int = 8
    backoff_counter: int = 0
    q: int = 0
    senses_cap2: int = 0
    retries: int = 0
    pending_message: Packet | None = None

    def check(self, cfg) -> None:
        if self.q < 0 or self.q > cfg.q_threshold + 1:
            raise ProtocolError(f"q={self.q} outside [0, q_thr+1]")
        cw = self.cw
        while cw > cfg.cw_min_slots and cw % 2 == 0:
            cw //= 2
        if cw != cfg.cw_min_slots:
            raise ProtocolError(f"cw={self.cw} not a doubling of cw_min")
        if self.phase is SourcePhase.SENSING_CAP2 and self.channel.is_base:
            raise ProtocolError("sensing reserved period while on base channel")


# Events ---------------------------------------------------------------------

@dataclass(slots=True)
class Cap1aStart:
    backoff: int


@dataclass(slots=True)
class SenseResult:
    sample: SinrSample
    # Reserved channel this source would move to on a failed CAP-1B sense
    # (its selected relay's channel); None when no relay can host it.
    fallback_reserved: ChannelId | None = None


@dataclass(slots=True)
class Cap1aEnd:
    pass


@dataclass(slots=True)
class CwElapsed:
    pass


@dataclass(slots=True)
class Cap1bEnd:
    # Final rendezvous resolution for case-3 sources: the reserved channel
    # with a listening relay, or None (defer). Backoff for the new contention.
    reserved: ChannelId | None = None
    backoff: int = 0


@dataclass(slots=True)
class TxAck:
    pass


@dataclass(slots=True)
class JamHeard:
    backoff: int


@dataclass(slots=True)
class Cap2End:
    pass


@dataclass(slots=True)
class SenseRetry:
    """Next reserved-channel sense attempt, with a fresh backoff draw."""
    backoff: int


SourceEvent = (Cap1aStart | SenseResult | Cap1aEnd | CwElapsed | Cap1bEnd
               | TxAck | JamHeard | Cap2End | SenseRetry)


# Actions --------------------------------------------------------------------

class ActionKind(enum.Enum):
    TRANSMIT = "transmit"
    DOUBLE_CW = "double_cw"
    SWITCH_TO_RESERVED = "switch_to_reserved"
    SWITCH_TO_BASE = "switch_to_base"
    WAIT = "wait"
    DROP = "drop"


@dataclass(slots=True)
class Action:
    kind: ActionKind
    channel: ChannelId | None = None


WAIT = Action(ActionKind.WAIT)


def classify_source(delta: SinrSample, threshold_db: float) -> str:
    """'S' (no interference) when the sample meets the threshold, else 'IS'.

    The boundary belongs to S: a sample exactly at the threshold is clean.
    """
    return "S" if delta.value_db >= threshold_db else "IS"


def csma_backoff_draw(cw: int, rng) -> int:
    """Uniform integer in [0, cw-1] from the caller's seeded stream."""
    if cw < 1:
        raise ValueError(f"cw must be >= 1, got {cw}")
    return rng.randrange(cw)


def fresh_source_state(node_id: int, cfg, pending: Packet | None) -> SourceState:
    """Frame-start reset: base channel, minimal CW, counters cleared."""
    return SourceState(node_id=node_id, phase=SourcePhase.IDLE,
                       channel=BASE_CHANNEL, cw=cfg.cw_min_slots,
                       pending_message=pending)


def _copy(st: SourceState) -> SourceState:
    new = SourceState.__new__(SourceState)
    new.node_id = st.node_id
    new.phase = st.phase
    new.channel = st.channel
    new.cw = st.cw
    new.backoff_counter = st.backoff_counter
    new.q = st.q
    new.senses_cap2 = st.senses_cap2
    new.retries = st.retries
    new.pending_message = st.pending_message
    return new


def source_step(state: SourceState, event: SourceEvent, cfg) -> tuple[SourceState, Action]:
    phase = state.phase
    etype = type(event)

    if etype is SenseResult:
        clean = event.sample.value_db >= cfg.sinr_threshold_db
        if phase is SourcePhase.SENSING_CAP1A:
            if clean:
                return state, Action(ActionKind.TRANSMIT, state.channel)
            new = _copy(state)
            new.phase = SourcePhase.CW_EXTENDED
            new.cw = min(2 * state.cw, cfg.cw_max_slots)
            return new, Action(ActionKind.DOUBLE_CW)
        if phase is SourcePhase.SENSING_CAP1B:
            if clean:
                return state, Action(ActionKind.TRANSMIT, state.channel)
            new = _copy(state)
            if event.fallback_reserved is None:
                new.phase = SourcePhase.DEFERRED
                new.channel = BASE_CHANNEL
                return new, Action(ActionKind.SWITCH_TO_BASE)
            new.phase = SourcePhase.SWITCHED_RESERVED
            new.channel = event.fallback_reserved
            return new, Action(ActionKind.SWITCH_TO_RESERVED, event.fallback_reserved)
        if phase is SourcePhase.SENSING_CAP2:
            if clean:
                return state, Action(ActionKind.TRANSMIT, state.channel)
            new = _copy(state)
            new.q = state.q + 1
            new.senses_cap2 = state.senses_cap2 + 1
            if new.q > cfg.q_threshold or new.senses_cap2 >= 1 + cfg.max_retries:
                new.phase = SourcePhase.DEFERRED
                new.channel = BASE_CHANNEL
                return new, Action(ActionKind.SWITCH_TO_BASE)
            return new, WAIT
        raise ProtocolError(f"sense_result in phase {phase}")

    if etype is Cap1aStart:
        if phase is not SourcePhase.IDLE:
            raise ProtocolError(f"cap1a_start in phase {phase}")
        if state.pending_message is None:
            return state, WAIT
        new = _copy(state)
        new.phase = SourcePhase.SENSING_CAP1A
        new.backoff_counter = event.backoff
        return new, WAIT

    if etype is TxAck:
        if phase not in (SourcePhase.SENSING_CAP1A, SourcePhase.SENSING_CAP1B,
                         SourcePhase.SENSING_CAP2):
            raise ProtocolError(f"tx_ack in phase {phase}")
        new = _copy(state)
        new.phase = SourcePhase.TX_DONE
        new.pending_message = None
        return new, WAIT

    if etype is JamHeard:
        if phase not in (SourcePhase.SENSING_CAP1A, SourcePhase.SENSING_CAP1B,
                         SourcePhase.SENSING_CAP2):
            raise ProtocolError(f"jam_heard in phase {phase}")
        new = _copy(state)
        new.retries = state.retries + 1
        if new.retries > cfg.max_retries:
            new.phase = SourcePhase.DEFERRED
            new.channel = BASE_CHANNEL
            return new, Action(ActionKind.SWITCH_TO_BASE)
        new.backoff_counter = event.backoff
        return new, WAIT

    if etype is SenseRetry:
        if phase is not SourcePhase.SENSING_CAP2:
            raise ProtocolError(f"sense_retry in phase {phase}")
        new = _copy(state)
        new.backoff_counter = event.backoff
        return new, WAIT

    if etype is Cap1aEnd:
        # CW-extended sources idle out the rest of CAP-1A; a source still
        # counting down simply continues into CAP-1B.
        if phase in (SourcePhase.CW_EXTENDED, SourcePhase.SENSING_CAP1A,
                     SourcePhase.IDLE, SourcePhase.TX_DONE, SourcePhase.DEFERRED):
            return state, WAIT
        raise ProtocolError(f"cap1a_end in phase {phase}")

    if etype is CwElapsed:
        if phase is not SourcePhase.CW_EXTENDED:
            raise ProtocolError(f"cw_elapsed in phase {phase}")
        new = _copy(state)
        new.phase = SourcePhase.SENSING_CAP1B
        return new, WAIT

    if etype is Cap1bEnd:
        if phase is SourcePhase.SWITCHED_RESERVED:
            new = _copy(state)
            if event.reserved is None:
                new.phase = SourcePhase.DEFERRED
                new.channel = BASE_CHANNEL
                return new, Action(ActionKind.SWITCH_TO_BASE)
            new.phase = SourcePhase.SENSING_CAP2
            new.channel = event.reserved
            new.backoff_counter = event.backoff
            return new, WAIT
        if phase in (SourcePhase.SENSING_CAP1A, SourcePhase.CW_EXTENDED,
                     SourcePhase.SENSING_CAP1B):
            # Base-channel contention never finished; carry to next frame.
            new = _copy(state)
            new.phase = SourcePhase.DEFERRED
            return new, WAIT
        if phase in (SourcePhase.IDLE, SourcePhase.TX_DONE, SourcePhase.DEFERRED):
            return state, WAIT
        raise ProtocolError(f"cap1b_end in phase {phase}")

    if etype is Cap2End:
        if phase is SourcePhase.SENSING_CAP2:
            new = _copy(state)
            new.phase = SourcePhase.DEFERRED
            new.channel = BASE_CHANNEL
            return new, Action(ActionKind.SWITCH_TO_BASE)
        if phase in (SourcePhase.IDLE, SourcePhase.TX_DONE, SourcePhase.DEFERRED,
                     SourcePhase.SENSING_CAP1A, SourcePhase.CW_EXTENDED,
                     SourcePhase.SENSING_CAP1B, SourcePhase.SWITCHED_RESERVED):
            parked = _park(phase)
            if state.channel.is_base:
                if parked is phase:
                    return state, WAIT
                new = _copy(state)
                new.phase = parked
                return new, WAIT
            new = _copy(state)
            new.phase = parked
            new.channel = BASE_CHANNEL
            return new, Action(ActionKind.SWITCH_TO_BASE)
        raise ProtocolError(f"cap2_end in phase {phase}")

    raise ProtocolError(f"unknown event {event!r}")


def _park(phase: SourcePhase) -> SourcePhase:
    if phase in (SourcePhase.TX_DONE, SourcePhase.IDLE):
        return phase
    return SourcePhase.DEFERRED


# ---------------------------------------------------------------------------
# Relay FSM


@dataclass(slots=True)
class RelayState:
    node_id: int
    reserved: ChannelId
    listening_channel: ChannelId = BASE_CHANNEL
    received_buffer: tuple[Packet, ...] = ()
    retries: int = 0


class RelayActionKind(enum.Enum):
    LISTEN_BASE = "listen_base"
    LISTEN_RESERVED = "listen_reserved"
    EMIT_JAM = "emit_jam"
    BUFFER_PACKET = "buffer_packet"
    SWITCH_TO_BASE = "switch_to_base"


@dataclass(slots=True)
class RelayAction:
    kind: RelayActionKind
    channel: ChannelId | None = None


@dataclass(slots=True)
class CapSegmentSense:
    sample: SinrSample


@dataclass(slots=True)
class CollisionDetected:
    channel: ChannelId


@dataclass(slots=True)
class PacketReceived:
    packet: Packet


@dataclass(slots=True)
class RetriesExhausted:
    pass


RelayEvent = CapSegmentSense | CollisionDetected | PacketReceived | RetriesExhausted


@dataclass(frozen=True, slots=True)
class JamSignal:
    emitting_relay: int
    channel: ChannelId
    duration: float

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("jam duration must be > 0")


def _copy_relay(st: RelayState) -> RelayState:
    new = RelayState.__new__(RelayState)
    new.node_id = st.node_id
    new.reserved = st.reserved
    new.listening_channel = st.listening_channel
    new.received_buffer = st.received_buffer
    new.retries = st.retries
    return new


def relay_step(state: RelayState, event: RelayEvent, cfg) -> tuple[RelayState, RelayAction]:
    etype = type(event)

    if etype is PacketReceived:
        new = _copy_relay(state)
        new.received_buffer = state.received_buffer + (event.packet,)
        return new, RelayAction(RelayActionKind.BUFFER_PACKET)

    if etype is CapSegmentSense:
        clean = event.sample.value_db >= cfg.sinr_threshold_db
        if state.listening_channel.is_base:
            if clean:
                return state, RelayAction(RelayActionKind.LISTEN_BASE, BASE_CHANNEL)
            new = _copy_relay(state)
            new.listening_channel = state.reserved
            new.retries = 0
            return new, RelayAction(RelayActionKind.LISTEN_RESERVED, state.reserved)
        if clean:
            return state, RelayAction(RelayActionKind.LISTEN_RESERVED, state.reserved)
        new = _copy_relay(state)
        new.retries = state.retries + 1
        if new.retries >= cfg.max_retries:
            new.listening_channel = BASE_CHANNEL
            new.retries = 0
            return new, RelayAction(RelayActionKind.SWITCH_TO_BASE, BASE_CHANNEL)
        return new, RelayAction(RelayActionKind.LISTEN_RESERVED, state.reserved)

    if etype is CollisionDetected:
        if event.channel != state.listening_channel:
            raise ProtocolError("collision reported on a channel the relay "
                                "is not listening to")
        return state, RelayAction(RelayActionKind.EMIT_JAM, event.channel)

    if etype is RetriesExhausted:
        new = _copy_relay(state)
        new.listening_channel = BASE_CHANNEL
        new.retries = 0
        return new, RelayAction(RelayActionKind.SWITCH_TO_BASE, BASE_CHANNEL)

    raise ProtocolError(f"unknown relay event {event!r}")


def fresh_relay_state(state: RelayState) -> RelayState:
    """Frame-start reset; the packet buffer survives across frames."""
    return replace(state, listening_channel=BASE_CHANNEL, retries=0)


# ---------------------------------------------------------------------------
# Interference bookkeeping and the coordinator


@dataclass(frozen=True, slots=True)
class InterferenceSets:
    P: frozenset[int]
    S: frozenset[int]
    IS: frozenset[int]
    TxR: frozenset[int]

    def __post_init__(self):
        if not (self.S | self.IS) <= self.P:
            raise ValueError("classified sources must be pending sources")
        if self.S & self.IS:
            raise ValueError("a source cannot be both clean and interfering")

    @property
    def interference_level(self) -> float:
        """Fraction of classified-pending sources found interfering."""
        if not self.P:
            return 0.0
        return len(self.IS) / len(self.P)


def flexible_slot_budget(interference_level: float, n_sources: int) -> int:
    """Flexible part grows with observed interference; never below one slot."""
    if not 0.0 <= interference_level <= 1.0:
        raise ValueError("interference level must be in [0, 1]")
    n = max(1, math.ceil(interference_level * n_sources / 2))
    return min(n, n_sources)


@dataclass
class CoordinatorState:
    tracker: ActivityTracker
    n_sources: int


def coordinator_step(coord: CoordinatorState, txr, interference_level: float,
                     cfg, frame_index: int, beacon_time: float) -> Superframe:
    """End-of-frame schedule build: acknowledge this frame's deliverers,
    refresh the activity window, and lay out the next beacon's slot map."""
    update_activity(coord.tracker, txr)
    active = coord.tracker.active_nodes()
    n_flex = flexible_slot_budget(interference_level, coord.n_sources)
    return build_superframe(None, active, n_flex, cfg,
                            frame_index=frame_index, beacon_time=beacon_time)
