"""Deterministic discrete-event simulation core.

One engine instance owns one network: an event queue sequences the frame
periods, and within each contention period the engine walks backoff-slot
boundaries, feeding the MAC state machines and executing their actions on a
shared transmitter registry. All randomness comes from per-node streams
derived from the master seed, so identical (config, seed) pairs replay
bit-identically and adding a node never perturbs the others' draws.

Carrier sensing measures how clean the channel is relative to the noise
floor: with no desired signal on the air, the sensed ratio is
N0 / (sum of interferer powers + N0), which reads 0 dB on a silent channel
and drops one dB per dB of interference-over-noise. Reception SINR is the
usual desired over (interference + noise), evaluated at the worst concurrent
overlap during the packet; a packet decodes when that worst-case SINR clears
the capture threshold.
"""

from __future__ import annotations

import dataclasses
import heapq
import math
import random
from dataclasses import dataclass, field

from .baselines import or_relay_select, pc_power_update
from .channel import (BASE_CHANNEL, ChannelEnvironment, ChannelId, GainTable,
                      NodePosition, PathLossModel, SinrSample, dbm_to_mw,
                      reserved_channel)
from .config import SimConfig
from . import mac
from .mac import (ActionKind, Cap1aEnd, Cap1aStart, Cap1bEnd, Cap2End,
                  CapSegmentSense, CollisionDetected, CoordinatorState,
                  CwElapsed, InterferenceSets, JamHeard, Packet,
                  PacketReceived, RelayActionKind, RelayState,
                  RetriesExhausted, SenseResult, SenseRetry, SourcePhase,
                  TxAck, csma_backoff_draw, flexible_slot_budget,
                  fresh_relay_state, fresh_source_state, relay_step,
                  source_step)
from .superframe import (ActivityTracker, Superframe, build_superframe,
                         flexible_slot_contend)

COORDINATOR_ID = 0

E_TX, E_RX, E_LISTEN, E_IDLE, E_SLEEP = "tx", "rx", "listen", "idle", "sleep"
ENERGY_STATES = (E_TX, E_RX, E_LISTEN, E_IDLE, E_SLEEP)

# Frame-local accumulator indices (ledger keys stay strings).
A_TX, A_RX, A_LISTEN, A_IDLE = 0, 1, 2, 3

_CASE_BY_PHASE = {
    SourcePhase.SENSING_CAP1A: "case1",
    SourcePhase.SENSING_CAP1B: "case2",
    SourcePhase.SENSING_CAP2: "case3",
}


class SimulationError(RuntimeError):
    pass


class InvariantViolation(SimulationError):
    """A mid-run protocol or accounting invariant failed; carries the recent
    trace tail for diagnosis."""

    def __init__(self, message: str, trace_tail=()):
        super().__init__(message)
        self.trace_tail = list(trace_tail)


# ---------------------------------------------------------------------------
# Event queue


class EventQueue:
    """Time-ordered queue; equal timestamps dequeue in insertion order."""

    def __init__(self):
        self._heap: list[tuple[float, int, int, object]] = []
        self._seq = 0
        self.last_popped = -math.inf

    def push(self, time_s: float, node_id: int, payload) -> None:
        heapq.heappush(self._heap, (time_s, self._seq, node_id, payload))
        self._seq += 1

    def pop(self) -> tuple[float, int, object]:
        time_s, _, node_id, payload = heapq.heappop(self._heap)
        if time_s < self.last_popped:
            raise InvariantViolation(
                f"event clock moved backwards: {time_s} < {self.last_popped}")
        self.last_popped = time_s
        return time_s, node_id, payload

    def __len__(self) -> int:
        return len(self._heap)


# ---------------------------------------------------------------------------
# Energy ledger


class EnergyLedger:
    """Per-node battery bookkeeping.

    Remaining energy is computed as initial minus the per-state cumulative
    sums, so the conservation identity holds by construction. A node whose
    battery empties is marked dead and stops participating.
    """

    def __init__(self, node_ids, initial_j: float):
        self.initial_j = {n: initial_j for n in node_ids}
        self.cumulative = {n: {s: 0.0 for s in ENERGY_STATES} for n in node_ids}
        self.total_spent = {n: 0.0 for n in node_ids}
        self.dead: set[int] = set()

    def remaining(self, node_id: int) -> float:
        return self.initial_j[node_id] - self.total_spent[node_id]

    def residue(self) -> float:
        return math.fsum(self.initial_j[n] - self.total_spent[n]
                         for n in self.initial_j)

    def conservation_drift(self, node_id: int) -> float:
        """How far the per-state sums disagree with the running total."""
        return abs(math.fsum(self.cumulative[node_id].values())
                   - self.total_spent[node_id])

    def is_dead(self, node_id: int) -> bool:
        return node_id in self.dead

    def spend_frame(self, node_id: int, items) -> None:
        """Settle one frame's (state, joules) pairs; falls back to the
        clamped path when the battery is nearly drained."""
        if node_id in self.dead:
            return
        total = 0.0
        for _, joules in items:
            total += joules
        if total < self.initial_j[node_id] - self.total_spent[node_id]:
            cums = self.cumulative[node_id]
            for state, joules in items:
                cums[state] += joules
            self.total_spent[node_id] += total
            return
        for state, joules in items:
            remaining = self.initial_j[node_id] - self.total_spent[node_id]
            if joules >= remaining:
                joules = remaining
                self.dead.add(node_id)
            self.cumulative[node_id][state] += joules
            self.total_spent[node_id] += joules
            if node_id in self.dead:
                return


def spend_energy(ledger: EnergyLedger, node_id: int, state: str,
                 duration_s: float, power_draw_w: float) -> EnergyLedger:
    """Deduct power x duration; clamp at an empty battery and mark the node
    dead. Negative durations are simulator bugs."""
    if duration_s < 0:
        raise SimulationError(f"negative duration {duration_s} for node {node_id}")
    if state not in ENERGY_STATES:
        raise SimulationError(f"unknown energy state {state!r}")
    if duration_s == 0.0 or node_id in ledger.dead:
        return ledger
    joules = power_draw_w * duration_s
    remaining = ledger.initial_j[node_id] - ledger.total_spent[node_id]
    if joules >= remaining:
        joules = remaining
        ledger.dead.add(node_id)
    ledger.cumulative[node_id][state] += joules
    ledger.total_spent[node_id] += joules
    return ledger


# ---------------------------------------------------------------------------
# Scenario construction


def place_nodes(cfg: SimConfig, rng: random.Random) -> list[NodePosition]:
    """Coordinator at the area center, relays on the midpoints of a centered
    square of half the area's span, sources uniform over the area."""
    if cfg.positions_file:
        return _load_positions(cfg)
    cx, cy = cfg.area_x_m / 2.0, cfg.area_y_m / 2.0
    h = min(cfg.area_x_m, cfg.area_y_m) / 4.0
    positions = [NodePosition(COORDINATOR_ID, cx, cy)]
    canonical = [(cx, cy - h), (cx, cy + h), (cx - h, cy), (cx + h, cy)]
    for i in range(cfg.n_relays):
        if i < 4:
            x, y = canonical[i]
        else:
            ang = 2.0 * math.pi * i / cfg.n_relays - math.pi / 2.0
            x, y = cx + h * math.cos(ang), cy + h * math.sin(ang)
        positions.append(NodePosition(1 + i, x, y))
    first_source = 1 + cfg.n_relays
    for i in range(cfg.n_sources):
        positions.append(NodePosition(
            first_source + i,
            rng.uniform(0.0, cfg.area_x_m),
            rng.uniform(0.0, cfg.area_y_m)))
    return positions


def _load_positions(cfg: SimConfig) -> list[NodePosition]:
    positions = []
    for lineno, line in enumerate(open(cfg.positions_file), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        parts = stripped.split()
        if len(parts) != 3:
            raise SimulationError(f"{cfg.positions_file}:{lineno}: expected 'id x y'")
        nid, x, y = int(parts[0]), float(parts[1]), float(parts[2])
        if not (0.0 <= x <= cfg.area_x_m and 0.0 <= y <= cfg.area_y_m):
            raise SimulationError(
                f"{cfg.positions_file}:{lineno}: ({x}, {y}) outside area")
        positions.append(NodePosition(nid, x, y))
    expected = 1 + cfg.n_relays + cfg.n_sources
    if len(positions) != expected or len({p.node_id for p in positions}) != expected:
        raise SimulationError(f"positions file must define {expected} unique node ids")
    return positions


def traffic_arrivals(cfg: SimConfig, rngs: dict[int, random.Random],
                     source_ids) -> set[int]:
    """Sources with data pending this frame; each draws independently."""
    if cfg.p_traffic >= 1.0:
        return set(source_ids)
    if cfg.p_traffic <= 0.0:
        return set()
    return {s for s in source_ids if rngs[s].random() < cfg.p_traffic}


# ---------------------------------------------------------------------------
# Frame-local records


@dataclass(slots=True)
class LiveTx:
    src: int
    dst: int                 # receiver node id; -1 for jam bursts
    channel: ChannelId
    start_t: float
    airtime: float
    occupied_end: float      # slot-aligned busy window
    actual_end: float
    desired_mw: float        # received power at dst
    max_interf_mw: float = 0.0
    jammed: bool = False
    is_jam: bool = False
    packet: Packet | None = None
    env_handle: object = None

    def active(self, t: float) -> bool:
        return self.start_t <= t < self.occupied_end


@dataclass(slots=True)
class FrameStats:
    t_end: float
    delta_sum_by_node: dict      # node -> summed sensed-SINR dB this frame
    delta_cnt_by_node: dict      # node -> sample count this frame
    energy_residue_j: float
    delivered_total: int

    def min_node_avg_db(self) -> float | None:
        vals = [self.delta_sum_by_node[n] / c
                for n, c in self.delta_cnt_by_node.items() if c]
        return min(vals) if vals else None


@dataclass
class SimResult:
    config: SimConfig
    frame_stats: list[FrameStats]
    ledger: EnergyLedger
    trace: list[dict]
    frames_run: int
    delivered_total: int

    def time_avg_min_sinr_db(self) -> float | None:
        vals = [m for m in (f.min_node_avg_db() for f in self.frame_stats)
                if m is not None]
        return sum(vals) / len(vals) if vals else None

    def time_avg_sinr_db(self) -> float | None:
        total = sum(sum(f.delta_sum_by_node.values()) for f in self.frame_stats)
        count = sum(sum(f.delta_cnt_by_node.values()) for f in self.frame_stats)
        return total / count if count else None


@dataclass
class _IaaFrameCtx:
    states: dict
    ready: dict                 # node -> absolute slot index of its next CCA
    classification: dict
    case_of: dict
    relay_worst_db: dict
    reserved_jams: dict
    relay_jam_tx_s: dict
    live_relays: list
    entry_t: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Engine


class Engine:
    def __init__(self, cfg: SimConfig):
        cfg.validate()
        self.cfg = cfg
        placement_rng = random.Random(f"{cfg.seed}/placement")
        self.positions = {p.node_id: p for p in place_nodes(cfg, placement_rng)}
        self.relay_ids = list(range(1, 1 + cfg.n_relays))
        self.source_ids = list(range(1 + cfg.n_relays,
                                     1 + cfg.n_relays + cfg.n_sources))
        self.all_ids = [COORDINATOR_ID] + self.relay_ids + self.source_ids
        self.rngs = {nid: random.Random(f"{cfg.seed}/{nid}") for nid in self.all_ids}

        self.model = PathLossModel(cfg.path_loss_exponent, cfg.reference_loss_db,
                                   cfg.reference_distance_m)
        self.gains = GainTable(self.positions, self.model)
        if cfg.shadowing_sigma_db > 0.0:
            self._apply_shadowing(random.Random(f"{cfg.seed}/shadowing"))

        self.noise_mw = dbm_to_mw(cfg.noise_dbm)
        self.capture_lin = dbm_to_mw(cfg.capture_threshold_db)
        self.busy_mw = dbm_to_mw(cfg.cca_busy_dbm)
        self.airtime = cfg.packet_airtime_s
        self.slot = cfg.backoff_slot_s
        self.occupied_slots = max(1, math.ceil(self.airtime / self.slot - 1e-12))

        self.relay_channel = {r: reserved_channel(r - 1) for r in self.relay_ids}
        self.relay_pref = {
            s: sorted(self.relay_ids,
                      key=lambda r: (self.positions[s].distance_to(self.positions[r]), r))
            for s in self.source_ids}

        self.env = ChannelEnvironment()
        self.queue = EventQueue()
        self.ledger = EnergyLedger(self.all_ids, cfg.initial_energy_j)
        start_dbm = cfg.pc_max_dbm if cfg.scheme == "pc" else cfg.tx_power_dbm
        self.power_dbm = {n: start_dbm for n in self.relay_ids + self.source_ids}
        self.power_mw = {n: dbm_to_mw(start_dbm)
                         for n in self.relay_ids + self.source_ids}

        self.coordinator = CoordinatorState(
            tracker=ActivityTracker(cfg.activity_window_frames),
            n_sources=cfg.n_sources)
        self.relay_states = {r: RelayState(node_id=r, reserved=self.relay_channel[r])
                             for r in self.relay_ids}
        self.pending: dict[int, Packet | None] = {s: None for s in self.source_ids}
        self.relay_buffers: dict[int, list[Packet]] = {r: [] for r in self.relay_ids}

        self.trace: list[dict] = []
        self._tracing = cfg.trace_enabled
        self.frame_stats: list[FrameStats] = []
        self.delivered_total = 0
        self.frame_index = 0

    # -- helpers --------------------------------------------------------------

    def _apply_shadowing(self, rng: random.Random) -> None:
        # Static symmetric log-normal shadowing per link, for sensitivity runs.
        sigma = self.cfg.shadowing_sigma_db
        ids = sorted(self.gains.gain)
        for i, a in enumerate(ids):
            for b in ids[i + 1:]:
                factor = dbm_to_mw(rng.gauss(0.0, sigma))
                self.gains.gain[a][b] *= factor
                self.gains.gain[b][a] *= factor

    def _tx_mw(self, node_id: int) -> float:
        return self.power_mw[node_id]

    def _set_power(self, node_id: int, dbm: float) -> None:
        self.power_dbm[node_id] = dbm
        self.power_mw[node_id] = dbm_to_mw(dbm)

    def _tx_draw_w(self, node_id: int) -> float:
        # PA draw scales with linear output power above a fixed circuitry
        # floor; at 0 dBm it equals the configured transmit draw.
        cfg = self.cfg
        if node_id not in self.power_dbm:
            return cfg.tx_draw_w
        floor = cfg.pc_circuitry_floor_w
        return floor + (cfg.tx_draw_w - floor) * dbm_to_mw(self.power_dbm[node_id])

    def _interference_mw(self, live: list[LiveTx], at_node: int, t: float,
                         exclude: LiveTx | None = None) -> float:
        total = 0.0
        gain = self.gains.gain[at_node]
        power = self.power_mw
        for tx in live:
            if tx is exclude or tx.src == at_node or not (tx.start_t <= t < tx.occupied_end):
                continue
            total += power[tx.src] * gain[tx.src]
        return total

    def _cca_delta_db(self, interference_mw: float) -> float:
        return 10.0 * math.log10(self.noise_mw / (interference_mw + self.noise_mw))

    def _sample_delta(self, node: int, delta_db: float) -> None:
        # Every carrier-sense reading feeds the per-node SINR statistics.
        self._delta_sum[node] = self._delta_sum.get(node, 0.0) + delta_db
        self._delta_cnt[node] = self._delta_cnt.get(node, 0) + 1

    def _emit(self, **kw) -> None:
        self.trace.append(kw)

    # -- public entry -----------------------------------------------------------

    def run(self) -> SimResult:
        cfg = self.cfg
        sf = self._initial_superframe()
        self.queue.push(sf.beacon_time, COORDINATOR_ID, "beacon")
        while True:
            t, _, kind = self.queue.pop()
            if kind != "beacon":
                raise SimulationError(f"unexpected event {kind!r}")
            if t >= cfg.duration_s or self.ledger.is_dead(COORDINATOR_ID):
                break
            sf = self._run_frame(sf)
            self.queue.push(sf.beacon_time, COORDINATOR_ID, "beacon")
        return SimResult(config=cfg, frame_stats=self.frame_stats,
                         ledger=self.ledger, trace=self.trace,
                         frames_run=self.frame_index,
                         delivered_total=self.delivered_total)

    def _initial_superframe(self) -> Superframe:
        if self.cfg.scheme == "iaa":
            n_flex = flexible_slot_budget(0.0, self.cfg.n_sources)
            return build_superframe(None, [], n_flex, self.cfg,
                                    frame_index=0, beacon_time=0.0)
        return self._baseline_superframe(0, 0.0)

    def _baseline_superframe(self, index: int, beacon_time: float) -> Superframe:
        # Single-channel schemes: one combined contention period spanning the
        # same total CAP time, then a fixed-length relay period.
        cfg = self.cfg
        cap_total = cfg.cap1a_s + cfg.cap1b_s + cfg.cap2_s
        t = beacon_time + cfg.beacon_s
        return Superframe(
            frame_index=index, beacon_time=beacon_time,
            beacon_duration=cfg.beacon_s,
            cap1a=(t, t + cap_total),
            cap1b=(t + cap_total, t + cap_total),
            cap2=(t + cap_total, t + cap_total),
            fixed_slots=(), flexible_slot_count=cfg.baseline_relay_slots,
            slot_duration=cfg.tdma_slot_s)

    # -- frame plumbing ---------------------------------------------------------

    def _run_frame(self, sf: Superframe) -> Superframe:
        cfg = self.cfg
        self.env.prune(sf.beacon_time)
        self._frame_energy = [[0.0, 0.0, 0.0, 0.0] for _ in self.all_ids]
        self._delta_sum: dict[int, float] = {}
        self._delta_cnt: dict[int, int] = {}
        self._frame_tx_log: list[tuple[int, float, float, ChannelId]] = []

        self._frame_energy[COORDINATOR_ID][A_TX] += sf.beacon_duration
        for n in self.relay_ids + self.source_ids:
            if not self.ledger.is_dead(n):
                self._frame_energy[n][A_RX] += sf.beacon_duration

        for s in sorted(traffic_arrivals(cfg, self.rngs, self.source_ids)):
            if self.pending[s] is None and not self.ledger.is_dead(s):
                self.pending[s] = Packet(source_id=s, created_frame=sf.frame_index)

        if cfg.scheme == "iaa":
            next_sf = self._run_frame_iaa(sf)
        else:
            next_sf = self._run_frame_baseline(sf)

        self._settle_frame_energy(sf)
        self.frame_stats.append(FrameStats(
            t_end=sf.end_time,
            delta_sum_by_node=self._delta_sum,
            delta_cnt_by_node=self._delta_cnt,
            energy_residue_j=self.ledger.residue(),
            delivered_total=self.delivered_total))
        self.frame_index += 1
        return next_sf

    def _settle_frame_energy(self, sf: Superframe) -> None:
        frame_len = sf.end_time - sf.beacon_time
        cfg = self.cfg
        for n, acc in enumerate(self._frame_energy):
            awake = acc[A_TX] + acc[A_RX] + acc[A_LISTEN] + acc[A_IDLE]
            sleep = frame_len - awake
            if sleep < -1e-9:
                raise InvariantViolation(
                    f"node {n} awake {awake:.6f}s exceeds frame {frame_len:.6f}s",
                    self.trace[-20:])
            items = []
            if acc[A_TX]:
                items.append((E_TX, acc[A_TX] * self._tx_draw_w(n)))
            if acc[A_RX]:
                items.append((E_RX, acc[A_RX] * cfg.rx_draw_w))
            if acc[A_LISTEN]:
                items.append((E_LISTEN, acc[A_LISTEN] * cfg.listen_draw_w))
            if acc[A_IDLE]:
                items.append((E_IDLE, acc[A_IDLE] * cfg.idle_draw_w))
            if sleep > 0.0:
                items.append((E_SLEEP, sleep * cfg.sleep_draw_w))
            self.ledger.spend_frame(n, items)

    # ------------------------------------------------------------------- IAA

    def _run_frame_iaa(self, sf: Superframe) -> Superframe:
        cfg = self.cfg
        pending_sources = [s for s in self.source_ids
                           if self.pending[s] is not None
                           and not self.ledger.is_dead(s)]
        p_set = frozenset(pending_sources)

        states = {}
        for s in self.source_ids:
            states[s] = fresh_source_state(s, cfg, self.pending[s])
        for r in self.relay_ids:
            self.relay_states[r] = dataclasses.replace(
                fresh_relay_state(self.relay_states[r]),
                received_buffer=tuple(self.relay_buffers[r]))
        live_relays = [r for r in self.relay_ids if not self.ledger.is_dead(r)]

        ctx = _IaaFrameCtx(states=states, ready={}, classification={},
                           case_of={}, relay_worst_db={r: 0.0 for r in live_relays},
                           reserved_jams={r: 0 for r in live_relays},
                           relay_jam_tx_s={r: 0.0 for r in live_relays},
                           live_relays=live_relays)

        for s in pending_sources:
            draw = csma_backoff_draw(states[s].cw, self.rngs[s])
            states[s], _ = source_step(states[s], Cap1aStart(backoff=draw), cfg)
            ctx.ready[s] = draw

        self.queue.push(sf.cap1a[0], COORDINATOR_ID, "cap1a")
        self.queue.pop()
        live: list[LiveTx] = []
        self._iaa_base_period(sf, sf.cap1a, live, ctx, segment="1A")

        # CW-extended sources idled out the rest of CAP-1A; their doubled
        # window counts down from the start of CAP-1B. Unfinished plain
        # backoffs carry their remaining slots over.
        n_1a = _n_slot_boundaries(sf.cap1a, self.slot)
        for s in pending_sources:
            st = states[s]
            if st.phase is SourcePhase.CW_EXTENDED:
                states[s], _ = source_step(st, Cap1aEnd(), cfg)
                ctx.ready[s] = csma_backoff_draw(states[s].cw, self.rngs[s])
            elif st.phase is SourcePhase.SENSING_CAP1A and s in ctx.ready:
                ctx.ready[s] = max(0, ctx.ready[s] - n_1a)
        self.queue.push(sf.cap1b[0], COORDINATOR_ID, "cap1b")
        self.queue.pop()
        self._iaa_base_period(sf, sf.cap1b, live, ctx, segment="1B")
        self._finalize_all(live, ctx, sf)

        # CAP-2 boundary: each relay judges the worst interference it saw
        # during CAP-1 and possibly moves to its reserved channel.
        switched: dict[ChannelId, int] = {}
        for r in live_relays:
            sample = SinrSample(ctx.relay_worst_db[r], sf.cap1b[1], BASE_CHANNEL, r)
            self.relay_states[r], action = relay_step(
                self.relay_states[r], CapSegmentSense(sample), cfg)
            if action.kind is RelayActionKind.LISTEN_RESERVED:
                switched[self.relay_states[r].reserved] = r
                if self._tracing:
                    self._emit(frame=sf.frame_index, t=sf.cap1b[1], node=r,
                               event="relay_switch", channel=str(action.channel))

        reserved_contenders: dict[ChannelId, list[int]] = {}
        for s in pending_sources:
            st = states[s]
            if st.phase is SourcePhase.SWITCHED_RESERVED:
                target = self._resolve_reserved(s, switched)
                draw = csma_backoff_draw(cfg.cw_min_slots, self.rngs[s])
                states[s], _ = source_step(
                    st, Cap1bEnd(reserved=target, backoff=draw), cfg)
                if target is not None:
                    reserved_contenders.setdefault(target, []).append(s)
                    ctx.ready[s] = draw
            elif st.phase in (SourcePhase.SENSING_CAP1A, SourcePhase.CW_EXTENDED,
                              SourcePhase.SENSING_CAP1B):
                states[s], _ = source_step(st, Cap1bEnd(), cfg)

        self.queue.push(sf.cap2[0], COORDINATOR_ID, "cap2")
        self.queue.pop()
        for channel in sorted(reserved_contenders, key=lambda c: c.index):
            relay = switched.get(channel)
            if relay is not None:
                self._iaa_reserved_period(sf, channel, relay,
                                          reserved_contenders[channel], ctx)

        # Relay listening: all of CAP-1 on base, CAP-2 only if switched; jam
        # bursts were transmit time, not listening.
        for r in live_relays:
            listen = cfg.cap1a_s + cfg.cap1b_s
            if not self.relay_states[r].listening_channel.is_base:
                listen += cfg.cap2_s
            listen = max(0.0, listen - ctx.relay_jam_tx_s[r])
            self._frame_energy[r][A_LISTEN] += listen

        # Frame-end channel discipline: everyone returns to base before TDMA.
        cap2_end_ev = Cap2End()
        for s in pending_sources:
            st = states[s]
            if not (st.channel.is_base and st.phase in
                    (SourcePhase.TX_DONE, SourcePhase.DEFERRED)):
                states[s], _ = source_step(st, cap2_end_ev, cfg)
            if s not in ctx.case_of:
                ctx.case_of[s] = "deferred"
            self.pending[s] = states[s].pending_message
            if self.pending[s] is not None and not self.pending[s].carried:
                self.pending[s] = dataclasses.replace(self.pending[s], carried=True)
        for r in live_relays:
            if not self.relay_states[r].listening_channel.is_base:
                self.relay_states[r], _ = relay_step(
                    self.relay_states[r], RetriesExhausted(), cfg)

        txr = self._run_tdma(sf)

        s_set = frozenset(s for s, c in ctx.classification.items() if c == "S")
        is_set = frozenset(s for s, c in ctx.classification.items() if c == "IS")
        sets = InterferenceSets(P=p_set, S=s_set, IS=is_set, TxR=frozenset(txr))

        if cfg.check_invariants:
            self._check_frame_invariants(sf, p_set, ctx, states)

        next_sf = mac.coordinator_step(
            self.coordinator, txr, sets.interference_level, cfg,
            frame_index=sf.frame_index + 1, beacon_time=sf.end_time)
        if self._tracing:
            self._emit(frame=sf.frame_index, t=sf.end_time, node=COORDINATOR_ID,
                       event="superframe", next=next_sf.to_dict(),
                       interference_level=sets.interference_level,
                       cases={s: ctx.case_of.get(s) for s in sorted(p_set)})
        return next_sf

    def _resolve_reserved(self, source: int,
                          switched: dict[ChannelId, int]) -> ChannelId | None:
        if not switched:
            return None
        for relay in self.relay_pref[source]:
            ch = self.relay_channel[relay]
            if ch in switched:
                return ch
        return None

    # -- IAA contention walks -----------------------------------------------

    def _iaa_base_period(self, sf: Superframe, period: tuple[float, float],
                         live: list[LiveTx], ctx: _IaaFrameCtx,
                         segment: str) -> None:
        cfg = self.cfg
        start, end = period
        deadline = sf.cap1b[1]    # base transmissions must end within CAP-1
        states, ready = ctx.states, ctx.ready
        n_bound = _n_slot_boundaries(period, self.slot)

        def is_contender(s):
            ph = states[s].phase
            if segment == "1A":
                return ph is SourcePhase.SENSING_CAP1A
            return ph in (SourcePhase.SENSING_CAP1A, SourcePhase.CW_EXTENDED,
                          SourcePhase.SENSING_CAP1B)

        for s in ready:
            if is_contender(s):
                ctx.entry_t[s] = start

        base_relays = [r for r in ctx.live_relays
                       if self.relay_states[r].listening_channel.is_base]
        slot = self.slot
        inf = math.inf
        k = 0
        while True:
            next_k = inf
            for v in ready.values():
                if k <= v < next_k:
                    next_k = v
            for tx in live:
                oe = tx.occupied_end
                if oe > start:
                    q = (oe - start) / slot - 1e-9
                    w = int(q) + 1 if q > 0 else 0
                    if k <= w < next_k:
                        next_k = w
            if next_k is inf or next_k >= n_bound:
                break
            k = next_k
            t = start + k * slot
            if live:
                self._finalize_ended(live, t, ctx, sf)
            sensers = [s for s, v in ready.items() if v == k]
            if len(sensers) > 1:
                sensers.sort()
            starters = []
            for s in sensers:
                st = states[s]
                if st.phase is SourcePhase.CW_EXTENDED:
                    states[s], _ = source_step(st, CwElapsed(), cfg)
                tx_start = t + self.slot
                cca_end = min(t + self.slot, end)
                if tx_start + self.airtime > deadline:
                    del ready[s]
                    self._close_listen(ctx, s, cca_end)
                    continue
                delta_db = self._cca_delta_db(self._interference_mw(live, s, t))
                self._sample_delta(s, delta_db)
                sample = SinrSample(delta_db, t, BASE_CHANNEL, s)
                if s not in ctx.classification:
                    ctx.classification[s] = mac.classify_source(
                        sample, cfg.sinr_threshold_db)
                fallback = self.relay_channel[self.relay_pref[s][0]]
                states[s], action = source_step(
                    states[s], SenseResult(sample, fallback_reserved=fallback), cfg)
                if self._tracing:
                    self._emit(frame=sf.frame_index, t=t, node=s, event="sense",
                               segment=segment, delta_db=round(delta_db, 3),
                               action=action.kind.value)
                if action.kind is ActionKind.TRANSMIT:
                    starters.append((s, tx_start))
                    del ready[s]
                elif action.kind is ActionKind.DOUBLE_CW:
                    del ready[s]
                    self._close_listen(ctx, s, cca_end)
                    self._frame_energy[s][A_IDLE] += max(0.0, end - cca_end)
                else:
                    del ready[s]
                    self._close_listen(ctx, s, cca_end)
            if starters:
                self._start_transmissions(starters, BASE_CHANNEL, live, ctx, sf,
                                          listening_relays=base_relays,
                                          period_start=start, segment=segment)
            k += 1
        for s in list(ready):
            if is_contender(s) and ctx.entry_t.get(s) is not None:
                self._close_listen(ctx, s, end)

    def _iaa_reserved_period(self, sf: Superframe, channel: ChannelId,
                             relay: int, contenders: list[int],
                             ctx: _IaaFrameCtx) -> None:
        cfg = self.cfg
        start, end = sf.cap2
        states, ready = ctx.states, ctx.ready
        live: list[LiveTx] = []
        n_bound = _n_slot_boundaries(sf.cap2, self.slot)
        for s in contenders:
            ctx.entry_t[s] = start
        slot = self.slot
        inf = math.inf
        k = 0
        while True:
            if self.relay_states[relay].listening_channel.is_base:
                break    # relay abandoned the reserved channel
            active = [s for s in contenders
                      if states[s].phase is SourcePhase.SENSING_CAP2 and s in ready]
            next_k = inf
            for s in active:
                v = ready[s]
                if k <= v < next_k:
                    next_k = v
            for tx in live:
                oe = tx.occupied_end
                if oe > start:
                    q = (oe - start) / slot - 1e-9
                    w = int(q) + 1 if q > 0 else 0
                    if k <= w < next_k:
                        next_k = w
            if next_k is inf or next_k >= n_bound:
                break
            k = next_k
            t = start + k * slot
            if live:
                self._finalize_ended(live, t, ctx, sf)
            sensers = [s for s in active if ready[s] == k]
            if len(sensers) > 1:
                sensers.sort()
            starters = []
            for s in sensers:
                tx_start = t + self.slot
                cca_end = min(t + self.slot, end)
                if tx_start + self.airtime > end:
                    del ready[s]
                    self._close_listen(ctx, s, cca_end)
                    continue
                delta_db = self._cca_delta_db(self._interference_mw(live, s, t))
                self._sample_delta(s, delta_db)
                sample = SinrSample(delta_db, t, channel, s)
                states[s], action = source_step(states[s], SenseResult(sample), cfg)
                if self._tracing:
                    self._emit(frame=sf.frame_index, t=t, node=s, event="sense",
                               segment="2", delta_db=round(delta_db, 3),
                               action=action.kind.value)
                if action.kind is ActionKind.TRANSMIT:
                    starters.append((s, tx_start))
                    del ready[s]
                elif action.kind is ActionKind.SWITCH_TO_BASE:
                    ctx.case_of[s] = "deferred"
                    del ready[s]
                    self._close_listen(ctx, s, cca_end)
                else:
                    draw = csma_backoff_draw(cfg.cw_min_slots, self.rngs[s])
                    states[s], _ = source_step(states[s], SenseRetry(draw), cfg)
                    ready[s] = k + 1 + draw
            if starters:
                self._start_transmissions(starters, channel, live, ctx, sf,
                                          listening_relays=[relay],
                                          period_start=start, segment="2")
            k += 1
        self._finalize_all(live, ctx, sf)
        for s in contenders:
            if ctx.entry_t.get(s) is not None:
                self._close_listen(ctx, s, end)

    def _close_listen(self, ctx: _IaaFrameCtx, node: int, until_t: float) -> None:
        entry = ctx.entry_t.get(node)
        if entry is not None:
            self._frame_energy[node][A_LISTEN] += max(0.0, until_t - entry)
            ctx.entry_t[node] = None

    def _start_transmissions(self, starters, channel: ChannelId,
                             live: list[LiveTx], ctx: _IaaFrameCtx,
                             sf: Superframe, listening_relays,
                             period_start: float, segment: str) -> None:
        """Register this slot's transmissions; any overlap on the channel
        makes the listening relay jam and everything in flight aborts."""
        new_txs = []
        for s, tx_start in starters:
            relay = self._select_relay(s, listening_relays)
            if relay is None:
                # Nothing listening here: nothing to address, defer quietly.
                ctx.states[s] = dataclasses.replace(
                    ctx.states[s], phase=SourcePhase.DEFERRED, channel=BASE_CHANNEL)
                ctx.case_of[s] = "deferred"
                self._close_listen(ctx, s, tx_start)
                continue
            desired = self._tx_mw(s) * self.gains.gain[s][relay]
            tx = LiveTx(src=s, dst=relay, channel=channel, start_t=tx_start,
                        airtime=self.airtime,
                        occupied_end=tx_start + self.occupied_slots * self.slot,
                        actual_end=tx_start + self.airtime,
                        desired_mw=desired, packet=ctx.states[s].pending_message)
            tx.max_interf_mw = self._interference_mw(live, relay, tx_start)
            self._close_listen(ctx, s, tx_start)
            tx.env_handle = self.env.register(s, channel, tx_start, tx.actual_end,
                                              validate=False)
            live.append(tx)
            new_txs.append(tx)
        if not new_txs:
            return
        t0 = new_txs[0].start_t
        overlapping = [x for x in live
                       if not x.is_jam and not x.jammed
                       and x.start_t <= t0 and x.actual_end > t0]
        if len(overlapping) >= 2:
            self._jam_channel(overlapping, channel, live, ctx, sf, t=t0,
                              listening_relays=listening_relays,
                              period_start=period_start)
        else:
            for tx in new_txs:
                if self._tracing:
                    self._emit(frame=sf.frame_index, t=tx.start_t, node=tx.src,
                               event="tx_start", dst=tx.dst, channel=str(channel),
                               segment=segment)

    def _select_relay(self, source: int, listening_relays) -> int | None:
        if not listening_relays:
            return None
        listening = set(listening_relays)
        for relay in self.relay_pref[source]:
            if relay in listening:
                return relay
        return None

    def _jam_channel(self, overlapping, channel: ChannelId, live,
                     ctx: _IaaFrameCtx, sf: Superframe, t: float,
                     listening_relays, period_start: float) -> None:
        """Collision: the lowest-id listening relay jams one slot after the
        overlap begins; every transmission in flight on the channel stops."""
        cfg = self.cfg
        abort_t = t + self.slot
        for tx in overlapping:
            tx.jammed = True
            tx.actual_end = min(tx.actual_end, abort_t)
            tx.occupied_end = min(tx.occupied_end, abort_t)
            if tx.env_handle is not None:
                self.env.truncate(tx.env_handle, abort_t)
        # Every relay listening here records how dirty its channel got,
        # not counting the packet addressed to itself.
        for r in listening_relays:
            interf = 0.0
            for tx in overlapping:
                if tx.dst != r:
                    interf += self._tx_mw(tx.src) * self.gains.gain[tx.src][r]
            sample_db = self._cca_delta_db(interf)
            if sample_db < ctx.relay_worst_db.get(r, 0.0):
                ctx.relay_worst_db[r] = sample_db
        emitter = min(listening_relays) if listening_relays else None
        jam_end = abort_t
        if emitter is not None:
            self.relay_states[emitter], action = relay_step(
                self.relay_states[emitter], CollisionDetected(channel), cfg)
            assert action.kind is RelayActionKind.EMIT_JAM
            jam_dur = cfg.jam_slots * self.slot
            jam_end = abort_t + jam_dur
            jam_tx = LiveTx(src=emitter, dst=-1, channel=channel,
                            start_t=abort_t, airtime=jam_dur,
                            occupied_end=jam_end, actual_end=jam_end,
                            desired_mw=0.0, is_jam=True)
            jam_tx.env_handle = self.env.register(emitter, channel, abort_t, jam_end,
                                                  validate=False)
            live.append(jam_tx)
            self._frame_energy[emitter][A_TX] += jam_dur
            ctx.relay_jam_tx_s[emitter] += jam_dur
            if self._tracing:
                self._emit(frame=sf.frame_index, t=abort_t, node=emitter,
                           event="jam", channel=str(channel),
                           victims=sorted(tx.src for tx in overlapping))
            if not channel.is_base:
                ctx.reserved_jams[emitter] += 1
                if ctx.reserved_jams[emitter] >= cfg.max_retries:
                    self.relay_states[emitter], _ = relay_step(
                        self.relay_states[emitter], RetriesExhausted(), cfg)
        resume_k = _slot_index_after(jam_end, period_start, self.slot)
        for tx in overlapping:
            s = tx.src
            self._frame_energy[s][A_TX] += tx.actual_end - tx.start_t
            draw = csma_backoff_draw(cfg.cw_min_slots, self.rngs[s])
            ctx.states[s], _ = source_step(ctx.states[s], JamHeard(backoff=draw), cfg)
            if ctx.states[s].phase is SourcePhase.DEFERRED:
                ctx.case_of[s] = "deferred"
                ctx.ready.pop(s, None)
            else:
                ctx.ready[s] = resume_k + draw
                ctx.entry_t[s] = tx.actual_end

    def _finalize_ended(self, live, t: float, ctx, sf: Superframe) -> None:
        for tx in list(live):
            if tx.occupied_end <= t + 1e-12:
                live.remove(tx)
                self._finalize_tx(tx, ctx, sf)

    def _finalize_all(self, live, ctx, sf: Superframe) -> None:
        for tx in list(live):
            live.remove(tx)
            self._finalize_tx(tx, ctx, sf)

    def _finalize_tx(self, tx: LiveTx, ctx: _IaaFrameCtx, sf: Superframe) -> None:
        if tx.is_jam:
            return
        if tx.jammed:
            # Transmit energy was charged at abort; the reception died.
            self._frame_tx_log.append((tx.src, tx.start_t, tx.actual_end, tx.channel))
            return
        self._frame_energy[tx.src][A_TX] += tx.airtime
        self._frame_tx_log.append((tx.src, tx.start_t, tx.actual_end, tx.channel))
        self._sample_delta(tx.dst, self._cca_delta_db(tx.max_interf_mw))
        sinr = tx.desired_mw / (tx.max_interf_mw + self.noise_mw)
        if sinr < self.capture_lin:
            return    # undecodable; the source defers at the period boundary
        sinr_db = 10.0 * math.log10(sinr)
        case = _CASE_BY_PHASE.get(ctx.states[tx.src].phase)
        if case is not None:
            ctx.case_of[tx.src] = case
        ctx.states[tx.src], _ = source_step(ctx.states[tx.src], TxAck(), self.cfg)
        self.pending[tx.src] = None
        self.relay_states[tx.dst], _ = relay_step(
            self.relay_states[tx.dst], PacketReceived(tx.packet), self.cfg)
        self.relay_buffers[tx.dst].append(tx.packet)
        if self._tracing:
            self._emit(frame=sf.frame_index, t=tx.actual_end, node=tx.dst,
                       event="rx", src=tx.src, sinr_db=round(sinr_db, 3))

    # ------------------------------------------------------------------ TDMA

    def _run_tdma(self, sf: Superframe) -> set[int]:
        """Fixed slots then flexible contention; only relays address the
        coordinator. Returns the relays the coordinator heard from."""
        cfg = self.cfg
        txr: set[int] = set()
        fit = max(1, int(sf.slot_duration // self.airtime))
        tdma_len = sf.total_slots * sf.slot_duration
        if tdma_len > 0 and not self.ledger.is_dead(COORDINATOR_ID):
            self._frame_energy[COORDINATOR_ID][A_LISTEN] += tdma_len

        occupants: dict[int, list[int]] = {}
        fixed_ids = sf.fixed_node_ids()
        for slot_i, relay in sf.fixed_slots:
            if self.relay_buffers[relay] and not self.ledger.is_dead(relay):
                occupants[slot_i] = [relay]
        for r in self.relay_ids:
            if (r in fixed_ids or not self.relay_buffers[r]
                    or self.ledger.is_dead(r)):
                continue
            if sf.flexible_slot_count < 1:
                continue
            pick = flexible_slot_contend(r, sf, self.rngs[r])
            if pick is not None:
                occupants.setdefault(pick, []).append(r)
                if self._tracing:
                    self._emit(frame=sf.frame_index, t=sf.tdma_start, node=r,
                               event="flex_pick", slot=pick)

        for slot_i in sorted(occupants):
            relays = occupants[slot_i]
            start, _ = sf.slot_interval(slot_i)
            bursts = {}
            for r in relays:
                n_pkts = min(len(self.relay_buffers[r]), fit)
                bursts[r] = n_pkts
                self._frame_energy[r][A_TX] += n_pkts * self.airtime
                self.env.register(r, BASE_CHANNEL, start,
                                  start + max(1, n_pkts) * self.airtime,
                                  validate=False)
            for r in relays:
                desired = self._tx_mw(r) * self.gains.gain[r][COORDINATOR_ID]
                interf = sum(self._tx_mw(o) * self.gains.gain[o][COORDINATOR_ID]
                             for o in relays if o != r)
                sinr = desired / (interf + self.noise_mw)
                decoded = sinr >= self.capture_lin
                if decoded:
                    for _ in range(bursts[r]):
                        self.relay_buffers[r].pop(0)
                    self.delivered_total += bursts[r]
                    txr.add(r)
                if self._tracing:
                    self._emit(frame=sf.frame_index, t=start, node=r,
                               event="tdma_tx", slot=slot_i, decoded=decoded,
                               collided=len(relays) > 1)
        return txr

    # ------------------------------------------------------------- baselines

    def _run_frame_baseline(self, sf: Superframe) -> Superframe:
        cfg = self.cfg
        cap = sf.cap1a
        live_relays = [r for r in self.relay_ids if not self.ledger.is_dead(r)]
        senders = sorted(s for s in self.source_ids
                         if self.pending[s] is not None
                         and not self.ledger.is_dead(s))
        self._csma_walk(sf, cap, senders, receivers=live_relays,
                        to_coordinator=False)
        for r in live_relays:
            self._frame_energy[r][A_LISTEN] += cap[1] - cap[0]

        relay_period = (sf.tdma_start, sf.end_time)
        carriers = [r for r in live_relays if self.relay_buffers[r]]
        self._csma_walk(sf, relay_period, carriers, receivers=[COORDINATOR_ID],
                        to_coordinator=True)
        if not self.ledger.is_dead(COORDINATOR_ID):
            self._frame_energy[COORDINATOR_ID][A_LISTEN] += \
                relay_period[1] - relay_period[0]
        return self._baseline_superframe(sf.frame_index + 1, sf.end_time)

    def _csma_walk(self, sf: Superframe, period: tuple[float, float],
                   contending: list[int], receivers: list[int],
                   to_coordinator: bool) -> None:
        """Slotted CSMA/CA with binary exponential backoff and energy-detect
        CCA, shared by both baseline hops. Collisions survive or die by
        capture; there is no jam signal."""
        cfg = self.cfg
        start, end = period
        n_bound = _n_slot_boundaries(period, self.slot)
        cw = {n: cfg.cw_min_slots for n in contending}
        attempts = {n: 0 for n in contending}
        ready = {}
        entry_t = {}
        for n in contending:
            ready[n] = csma_backoff_draw(cw[n], self.rngs[n])
            entry_t[n] = start
        live: list[LiveTx] = []
        slot = self.slot
        inf = math.inf
        k = 0
        while True:
            next_k = inf
            for v in ready.values():
                if k <= v < next_k:
                    next_k = v
            for tx in live:
                q = (tx.occupied_end - start) / slot - 1e-9
                w = int(q) + 1 if q > 0 else 0
                if k <= w < next_k:
                    next_k = w
            if next_k is inf or next_k >= n_bound:
                break
            k = next_k
            t = start + k * slot
            if live:
                self._baseline_finalize(live, t, sf, cw, attempts, ready, entry_t,
                                        to_coordinator, start)
            sensers = [n for n, v in ready.items() if v == k]
            if len(sensers) > 1:
                sensers.sort()
            for n in sensers:
                tx_start = t + self.slot
                cca_end = min(t + self.slot, end)
                airtime = self._burst_airtime(n, to_coordinator)
                if tx_start + airtime > end:
                    del ready[n]
                    self._frame_energy[n][A_LISTEN] += cca_end - entry_t.pop(n)
                    continue
                interf = self._interference_mw(live, n, t)
                self._sample_delta(n, self._cca_delta_db(interf))
                if interf + self.noise_mw > self.busy_mw:
                    # Busy channel: wait for it to clear, re-sensing every
                    # slot. Retries are charged only to actual collisions.
                    ready[n] = k + 1
                    continue
                if to_coordinator:
                    dst = COORDINATOR_ID
                else:
                    dst = self._or_select(n, receivers, live, t)
                    if dst is None:
                        del ready[n]
                        self._frame_energy[n][A_LISTEN] += cca_end - entry_t.pop(n)
                        continue
                desired = self._tx_mw(n) * self.gains.gain[n][dst]
                tx = LiveTx(src=n, dst=dst, channel=BASE_CHANNEL,
                            start_t=tx_start, airtime=airtime,
                            occupied_end=tx_start + math.ceil(
                                airtime / self.slot - 1e-12) * self.slot,
                            actual_end=tx_start + airtime,
                            desired_mw=desired, packet=self.pending.get(n))
                tx.max_interf_mw = self._interference_mw(live, dst, tx_start)
                # A new arrival raises the interference floor for everything
                # already in flight at its receiver.
                for other in live:
                    if other.actual_end > tx_start:
                        now = self._interference_mw(
                            [x for x in live if x is not other], other.dst,
                            tx_start) + self._tx_mw(n) * self.gains.gain[n][other.dst]
                        other.max_interf_mw = max(other.max_interf_mw, now)
                self._frame_energy[n][A_LISTEN] += tx_start - entry_t.pop(n)
                self.env.register(n, BASE_CHANNEL, tx_start, tx.actual_end,
                                  validate=False)
                live.append(tx)
                del ready[n]
                if self._tracing:
                    self._emit(frame=sf.frame_index, t=tx_start, node=n,
                               event="tx_start", dst=dst,
                               relay_hop=to_coordinator)
            k += 1
        self._baseline_finalize(live, math.inf, sf, cw, attempts, ready, entry_t,
                                to_coordinator, start)
        for n, entry in entry_t.items():
            self._frame_energy[n][A_LISTEN] += max(0.0, end - entry)

    def _burst_airtime(self, node: int, to_coordinator: bool) -> float:
        if not to_coordinator:
            return self.airtime
        fit = max(1, int(self.cfg.tdma_slot_s // self.airtime))
        return max(1, min(len(self.relay_buffers[node]), fit)) * self.airtime

    def _or_select(self, source: int, relays: list[int], live,
                   t: float) -> int | None:
        candidates = []
        for r in relays:
            desired = self._tx_mw(source) * self.gains.gain[source][r]
            interf = self._interference_mw(live, r, t)
            sinr_db = 10.0 * math.log10(desired / (interf + self.noise_mw))
            candidates.append((r, sinr_db))
        return or_relay_select(candidates)

    def _baseline_finalize(self, live, t: float, sf: Superframe, cw, attempts,
                           ready, entry_t, to_coordinator: bool,
                           period_start: float) -> None:
        cfg = self.cfg
        for tx in list(live):
            if t != math.inf and tx.occupied_end > t + 1e-12:
                continue
            live.remove(tx)
            n = tx.src
            self._frame_energy[n][A_TX] += tx.airtime
            if tx.dst != COORDINATOR_ID:
                self._sample_delta(tx.dst, self._cca_delta_db(tx.max_interf_mw))
            sinr = tx.desired_mw / (tx.max_interf_mw + self.noise_mw)
            if sinr >= self.capture_lin:
                sinr_db = 10.0 * math.log10(sinr)
                if to_coordinator:
                    n_pkts = round(tx.airtime / self.airtime)
                    for _ in range(min(n_pkts, len(self.relay_buffers[n]))):
                        self.relay_buffers[n].pop(0)
                    self.delivered_total += n_pkts
                else:
                    self.pending[n] = None
                    self.relay_buffers[tx.dst].append(tx.packet)
                if cfg.scheme == "pc":
                    self._set_power(n, pc_power_update(
                        self.power_dbm[n], sinr_db, cfg.pc_target_sinr_db,
                        cfg.pc_step_db, (cfg.pc_min_dbm, cfg.pc_max_dbm),
                        cfg.pc_hysteresis_db))
                if self._tracing:
                    self._emit(frame=sf.frame_index, t=tx.actual_end, node=tx.dst,
                               event="rx", src=n, sinr_db=round(sinr_db, 3))
            else:
                attempts[n] += 1
                if attempts[n] <= cfg.max_retries:
                    cw[n] = min(2 * cw[n], cfg.cw_max_slots)
                    resume = _slot_index_after(tx.actual_end, period_start, self.slot)
                    ready[n] = resume + csma_backoff_draw(cw[n], self.rngs[n])
                    entry_t[n] = tx.actual_end

    # ------------------------------------------------------------ invariants

    def _check_frame_invariants(self, sf: Superframe, p_set, ctx, states) -> None:
        tail = self.trace[-40:]
        for s in p_set:
            if s not in ctx.case_of:
                raise InvariantViolation(f"source {s} ended frame uncased", tail)
            if states[s].phase not in (SourcePhase.TX_DONE, SourcePhase.DEFERRED):
                raise InvariantViolation(
                    f"source {s} ended frame in phase {states[s].phase}", tail)
            if not states[s].channel.is_base:
                raise InvariantViolation(f"source {s} not on base at frame end", tail)
            states[s].check(self.cfg)
        for r in self.relay_ids:
            if not self.relay_states[r].listening_channel.is_base:
                raise InvariantViolation(f"relay {r} not on base at frame end", tail)
        for src, start, end, channel in self._frame_tx_log:
            if channel.is_base:
                if not (sf.cap1a[0] <= start and end <= sf.cap1b[1] + 1e-9):
                    raise InvariantViolation(
                        f"base tx by {src} [{start}, {end}] outside CAP-1", tail)
            else:
                if not (sf.cap2[0] <= start and end <= sf.cap2[1] + 1e-9):
                    raise InvariantViolation(
                        f"reserved tx by {src} [{start}, {end}] outside CAP-2", tail)
        ids = sf.fixed_node_ids()
        if len(ids) != len(set(ids)):
            raise InvariantViolation("duplicate fixed slot assignment", tail)
        if ids and sf.total_slots <= len(ids):
            raise InvariantViolation("total slots must exceed fixed count", tail)
        for n in self.ledger.initial_j:
            if (self.ledger.conservation_drift(n)
                    > 1e-12 * max(1.0, self.ledger.initial_j[n])):
                raise InvariantViolation(f"energy conservation broke for {n}", tail)


def _n_slot_boundaries(period: tuple[float, float], slot: float) -> int:
    return max(0, math.ceil((period[1] - period[0]) / slot - 1e-9))


def _slot_index_after(t: float, period_start: float, slot: float) -> int:
    return max(0, math.ceil((t - period_start) / slot - 1e-9))


def run(cfg: SimConfig) -> SimResult:
    """Run one simulation to completion; the public entry point."""
    return Engine(cfg).run()
