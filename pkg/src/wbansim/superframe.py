"""Superframe timeline construction and flexible-TDMA slot bookkeeping.

A frame is beacon -> CAP-1A -> CAP-1B -> CAP-2 -> TDMA part. The TDMA part
holds the fixed slots (one per recently-active node, ascending node id) first
and the flexible slots after them. Newcomers contend for flexible slots by
uniform random choice and are promoted into the fixed part once the
coordinator hears from them.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field


@dataclass(frozen=True, slots=True)
class Superframe:
    frame_index: int
    beacon_time: float
    beacon_duration: float
    cap1a: tuple[float, float]            # [start, end)
    cap1b: tuple[float, float]
    cap2: tuple[float, float]
    fixed_slots: tuple[tuple[int, int], ...]   # (slot_index, node_id)
    flexible_slot_count: int
    slot_duration: float

    def __post_init__(self):
        if self.flexible_slot_count < 0:
            raise ValueError("flexible_slot_count must be >= 0")
        ids = [nid for _, nid in self.fixed_slots]
        if len(ids) != len(set(ids)):
            raise ValueError("fixed slot node ids must be unique")
        bounds = [self.beacon_time, self.cap1a[0], self.cap1a[1], self.cap1b[0],
                  self.cap1b[1], self.cap2[0], self.cap2[1]]
        for a, b in zip(bounds, bounds[1:]):
            if b < a:
                raise ValueError("superframe periods must be ordered")

    @property
    def total_slots(self) -> int:
        """p = m + n."""
        return len(self.fixed_slots) + self.flexible_slot_count

    @property
    def tdma_start(self) -> float:
        return self.cap2[1]

    @property
    def end_time(self) -> float:
        return self.tdma_start + self.total_slots * self.slot_duration

    def slot_interval(self, slot_index: int) -> tuple[float, float]:
        if not 0 <= slot_index < self.total_slots:
            raise IndexError(f"slot {slot_index} out of range 0..{self.total_slots - 1}")
        start = self.tdma_start + slot_index * self.slot_duration
        return (start, start + self.slot_duration)

    def flexible_slot_indices(self) -> range:
        return range(len(self.fixed_slots), self.total_slots)

    def fixed_node_ids(self) -> tuple[int, ...]:
        return tuple(nid for _, nid in self.fixed_slots)

    def to_dict(self) -> dict:
        return {
            "frame": self.frame_index,
            "beacon_time": self.beacon_time,
            "cap1a": list(self.cap1a),
            "cap1b": list(self.cap1b),
            "cap2": list(self.cap2),
            "fixed_slots": [list(p) for p in self.fixed_slots],
            "flexible_slots": self.flexible_slot_count,
            "slot_duration": self.slot_duration,
        }


def build_superframe(prev: Superframe | None, active_nodes, n_flexible: int,
                     cfg, frame_index: int | None = None,
                     beacon_time: float | None = None) -> Superframe:
    """Lay out the next frame's timeline.

    `active_nodes` become the fixed part in ascending node-id order. When the
    fixed part is nonempty, at least one flexible slot is required so the
    total strictly exceeds the fixed count.
    """
    active = sorted(set(active_nodes))
    if active and n_flexible < 1:
        raise ValueError("need n_flexible >= 1 when any node holds a fixed slot")
    if n_flexible < 0:
        raise ValueError("n_flexible must be >= 0")
    if frame_index is None:
        frame_index = 0 if prev is None else prev.frame_index + 1
    if beacon_time is None:
        beacon_time = 0.0 if prev is None else prev.end_time
    for name in ("beacon_s", "cap1a_s", "cap1b_s", "cap2_s", "tdma_slot_s"):
        if getattr(cfg, name) <= 0:
            raise ValueError(f"{name} must be positive")
    t = beacon_time + cfg.beacon_s
    cap1a = (t, t + cfg.cap1a_s)
    cap1b = (cap1a[1], cap1a[1] + cfg.cap1b_s)
    cap2 = (cap1b[1], cap1b[1] + cfg.cap2_s)
    fixed = tuple((i, nid) for i, nid in enumerate(active))
    return Superframe(
        frame_index=frame_index,
        beacon_time=beacon_time,
        beacon_duration=cfg.beacon_s,
        cap1a=cap1a,
        cap1b=cap1b,
        cap2=cap2,
        fixed_slots=fixed,
        flexible_slot_count=n_flexible,
        slot_duration=cfg.tdma_slot_s,
    )


@dataclass
class ActivityTracker:
    """Sliding window of per-frame delivery flags; a node is active while the
    coordinator heard from it in any of the last `window` frames."""

    window: int = 3
    frames: deque = field(default_factory=deque)

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")
        while len(self.frames) < self.window:
            self.frames.append(frozenset())

    def push(self, frame_deliveries) -> None:
        self.frames.append(frozenset(frame_deliveries))
        while len(self.frames) > self.window:
            self.frames.popleft()

    def is_active(self, node_id: int) -> bool:
        return any(node_id in frame for frame in self.frames)

    def active_nodes(self) -> list[int]:
        seen = set()
        for frame in self.frames:
            seen |= frame
        return sorted(seen)


def update_activity(tracker: ActivityTracker, frame_deliveries) -> ActivityTracker:
    tracker.push(frame_deliveries)
    return tracker


def flexible_slot_contend(node_id: int, frame: Superframe, rng,
                          occupied=frozenset()) -> int | None:
    """Pick uniformly among the empty flexible slots; None when all are taken.

    Contending nodes cannot see each other's simultaneous picks, so callers
    model collisions by passing the same (usually empty) `occupied` set to
    every contender in a frame.
    """
    if node_id in frame.fixed_node_ids():
        raise ValueError(f"node {node_id} already holds a fixed slot")
    empty = [i for i in frame.flexible_slot_indices() if i not in occupied]
    if not empty:
        return None
    return empty[rng.randrange(len(empty))]
