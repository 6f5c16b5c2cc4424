"""Exact event-driven simulation of annihilating fronts on one dendrite.

Each impulse (t, x) starts a positive front (toward the soma at 0) and a
negative front (toward the far end at L), both moving at speed rho.  Meeting
fronts annihilate; a positive front reaching 0 is a soma hit, a negative front
reaching L is a far exit.  Event times come from the conserved birth
coordinates (one arithmetic expression each), never from integrating
positions, so a trace is bit-reproducible from its impulse stream.
"""

from __future__ import annotations

import heapq
import io
from dataclasses import dataclass, field

from .cloud import GeneralPositionError, Impulse, PointCloud

__all__ = [
    "Front",
    "DendriteTrace",
    "StreamingFrontEngine",
    "simulate_fronts",
    "soma_hit_time",
    "EventCollisionError",
]

TOWARD_SOMA = +1
AWAY_FROM_SOMA = -1

_BIRTH, _COLLIDE, _SOMA, _EXIT = 0, 1, 2, 3
_KIND_NAME = {_BIRTH: "birth", _COLLIDE: "annihilation", _SOMA: "soma_hit", _EXIT: "far_exit"}


def soma_hit_time(birth_t: float, birth_x: float, rho: float) -> float:
    """Arrival time of an unobstructed positive front at the soma.

    Written as (rho*t + x)/rho so that every engine in the package computes
    the identical double for the same birth point.
    """
    return (rho * birth_t + birth_x) / rho


class EventCollisionError(RuntimeError):
    """Two same-time events share a front; the evolution is ambiguous."""


@dataclass
class Front:
    fid: int
    birth_t: float
    birth_x: float
    direction: int
    prev: "Front | None" = field(default=None, repr=False)
    next: "Front | None" = field(default=None, repr=False)
    death_time: float | None = None

    def position(self, t: float, rho: float) -> float:
        if self.direction == TOWARD_SOMA:
            return self.birth_x - rho * (t - self.birth_t)
        return self.birth_x + rho * (t - self.birth_t)

    @property
    def alive(self) -> bool:
        return self.death_time is None


@dataclass
class DendriteTrace:
    """Event log of one dendrite run."""

    soma_hits: list[float] = field(default_factory=list)
    far_exits: list[float] = field(default_factory=list)
    annihilations: list[tuple[float, float, int, int]] = field(default_factory=list)
    impulse_count: int = 0
    alive_count: int = 0
    events: list[tuple[float, str, float, int]] = field(default_factory=list)

    def hits_before(self, t: float) -> int:
        from bisect import bisect_right
        return bisect_right(self.soma_hits, t)

    def check_conservation(self):
        lhs = 2 * self.impulse_count
        rhs = 2 * len(self.annihilations) + len(self.soma_hits) + len(self.far_exits) + self.alive_count
        if lhs != rhs:
            raise AssertionError(
                f"front conservation violated: 2*{self.impulse_count} != "
                f"2*{len(self.annihilations)} + {len(self.soma_hits)} + "
                f"{len(self.far_exits)} + {self.alive_count}")

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("time,kind,x,front_id\n")
        for t, kind, x, fid in self.events:
            buf.write(f"{t!r},{kind},{x!r},{fid}\n")
        return buf.getvalue()


class StreamingFrontEngine:
    """Causal front simulation: push impulses in time order, advance, collect hits.

    Batch and streaming use give identical traces for identical impulse
    streams.  Pushing an impulse earlier than the engine time, or one that
    violates general position against any previous impulse, raises.
    """

    def __init__(self, rho: float, L: float):
        if rho <= 0 or L <= 0:
            raise ValueError("rho and L must be positive")
        self.rho = rho
        self.L = L
        self.time = 0.0
        self.trace = DendriteTrace()
        self._heap: list[tuple[float, int, int, tuple]] = []
        self._seq = 0
        self._next_fid = 0
        self._head: Front | None = None   # lowest position
        self._fronts: dict[int, Front] = {}
        self._seen_u: set[float] = set()
        self._seen_v: set[float] = set()
        self._last_impulse: Impulse | None = None
        self._emitted_hits = 0

    # ------------------------------------------------------------------ queue

    def _push(self, time: float, kind: int, data: tuple):
        heapq.heappush(self._heap, (time, kind, self._seq, data))
        self._seq += 1

    def push_impulse(self, imp: Impulse):
        if imp.t < self.time:
            raise ValueError(
                f"impulse at t={imp.t} pushed after engine advanced to {self.time}")
        u = self.rho * imp.t - imp.x
        v = self.rho * imp.t + imp.x
        if u in self._seen_u or v in self._seen_v:
            prev = self._last_impulse if self._last_impulse is not None else imp
            raise GeneralPositionError(prev, imp)
        self._seen_u.add(u)
        self._seen_v.add(v)
        self._last_impulse = imp
        if not (0.0 <= imp.x <= self.L):
            raise ValueError(f"impulse position {imp.x} outside [0, {self.L}]")
        self._push(imp.t, _BIRTH, (imp.t, imp.x))

    # ----------------------------------------------------------------- events

    def advance_to(self, t: float) -> list[float]:
        """Process every event with time <= t; returns soma hits emitted now."""
        start = self._emitted_hits
        group_time = None
        group_ids: set[int] = set()
        while self._heap and self._heap[0][0] <= t:
            time, kind, _seq, data = heapq.heappop(self._heap)
            if group_time is None or time > group_time:
                group_time = time
                group_ids = set()
            touched = self._handle(time, kind, data, group_ids)
            group_ids |= touched
            self.time = max(self.time, time)
        self.time = max(self.time, t)
        return self.trace.soma_hits[start:]

    def _handle(self, time: float, kind: int, data: tuple, group_ids: set[int]) -> set[int]:
        if kind == _BIRTH:
            return self._birth(time, data)
        if kind == _COLLIDE:
            fa, fb = data
            a, b = self._fronts[fa], self._fronts[fb]
            if not (a.alive and b.alive):
                # a same-time event already consumed one of the pair
                if (a.death_time == time or b.death_time == time) and (fa in group_ids or fb in group_ids):
                    raise EventCollisionError(
                        f"simultaneous events at t={time!r} share fronts {fa}/{fb}")
                return set()
            if a.next is not b:
                return set()  # superseded adjacency
            if fa in group_ids or fb in group_ids:
                raise EventCollisionError(
                    f"simultaneous events at t={time!r} share fronts {fa}/{fb}")
            x_c = (a.birth_x + b.birth_x + self.rho * (b.birth_t - a.birth_t)) / 2.0
            self._kill(a, time)
            self._kill(b, time)
            self.trace.annihilations.append((time, x_c, fb, fa))
            self.trace.events.append((time, _KIND_NAME[_COLLIDE], x_c, fa))
            return {fa, fb}
        # soma hit and far exit share the validity logic
        (fid,) = data
        f = self._fronts[fid]
        if not f.alive:
            if f.death_time == time and fid in group_ids:
                raise EventCollisionError(
                    f"simultaneous events at t={time!r} share front {fid}")
            return set()
        if fid in group_ids:
            raise EventCollisionError(
                f"simultaneous events at t={time!r} share front {fid}")
        self._kill(f, time)
        if kind == _SOMA:
            self.trace.soma_hits.append(time)
            self.trace.events.append((time, _KIND_NAME[_SOMA], 0.0, fid))
        else:
            self.trace.far_exits.append(time)
            self.trace.events.append((time, _KIND_NAME[_EXIT], self.L, fid))
        return {fid}

    def _birth(self, time: float, data: tuple) -> set[int]:
        t_b, x_b = data
        pos = Front(self._next_fid, t_b, x_b, TOWARD_SOMA)
        neg = Front(self._next_fid + 1, t_b, x_b, AWAY_FROM_SOMA)
        self._next_fid += 2
        self._fronts[pos.fid] = pos
        self._fronts[neg.fid] = neg
        self.trace.impulse_count += 1
        self.trace.alive_count += 2
        self.trace.events.append((time, _KIND_NAME[_BIRTH], x_b, pos.fid))

        # locate neighbors in the position-ordered list
        left = None
        cur = self._head
        while cur is not None and cur.position(time, self.rho) < x_b:
            left = cur
            cur = cur.next
        right = cur
        pos.prev, pos.next = left, neg
        neg.prev, neg.next = pos, right
        if left is not None:
            left.next = pos
        else:
            self._head = pos
        if right is not None:
            right.prev = neg

        self._push(soma_hit_time(t_b, x_b, self.rho), _SOMA, (pos.fid,))
        self._push(t_b + (self.L - x_b) / self.rho, _EXIT, (neg.fid,))
        self._maybe_collision(left, pos)
        self._maybe_collision(neg, right)
        return set()

    def _maybe_collision(self, lower: Front | None, upper: Front | None):
        """Schedule the meeting of an adjacent converging pair.

        Converging means lower moves away from the soma (up) and upper moves
        toward it (down); the meeting time in birth coordinates is
        (x_up - x_lo + rho (t_lo + t_up)) / (2 rho).
        """
        if lower is None or upper is None:
            return
        if lower.direction != AWAY_FROM_SOMA or upper.direction != TOWARD_SOMA:
            return
        t_c = (upper.birth_x - lower.birth_x + self.rho * (lower.birth_t + upper.birth_t)) / (2.0 * self.rho)
        self._push(t_c, _COLLIDE, (lower.fid, upper.fid))

    def _kill(self, f: Front, time: float):
        f.death_time = time
        self.trace.alive_count -= 1
        if f.prev is not None:
            f.prev.next = f.next
        else:
            self._head = f.next
        if f.next is not None:
            f.next.prev = f.prev
        self._maybe_collision(f.prev, f.next)
        f.prev = f.next = None

    # ------------------------------------------------------------------ state

    def alive_positions(self, t: float) -> list[float]:
        out = []
        cur = self._head
        while cur is not None:
            out.append(cur.position(t, self.rho))
            cur = cur.next
        return out


def simulate_fronts(impulses: PointCloud, horizon: float, L: float = 1.0) -> DendriteTrace:
    """Run the front evolution for every impulse born up to the horizon."""
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    engine = StreamingFrontEngine(impulses.rho, L)
    return run_cloud(engine, impulses, horizon)


def run_cloud(engine: StreamingFrontEngine, impulses: PointCloud, horizon: float) -> DendriteTrace:
    for m in impulses:
        if m.t > horizon:
            break
        engine.push_impulse(m)
    engine.advance_to(horizon)
    engine.trace.check_conservation()
    return engine.trace
