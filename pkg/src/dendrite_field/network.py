"""The n-neuron interacting particle systems, soft and hard.

One global time-ordered event loop drives everything: thinning candidates and
bound refreshes (soft), drift crossings (hard), grid samples, and the
potential kicks coming out of the per-dendrite soma-hit streams.  Kicks are
applied at their exact hit times; a neuron's dominating rate is re-armed
whenever its kick budget is spent, which keeps the thinning construction
exact in law.

Two interchangeable dendrite backends produce the hit streams: the bucketed
pile engine (production) and per-dendrite event-driven front engines
(verification); they emit bit-identical hits for identical seeds.
"""

from __future__ import annotations

import heapq
import io
import math
from dataclasses import dataclass, field

import numpy as np

from ._rng import hash_stream_seed
from .functions import FunctionSpec, InverseCdfTable, sample_density
from .hitstream import (DONE, KICK, RESAMPLE, BucketHitBank, EdgeSampler,
                        FrontHitBank, flow_affine)
from .params import HardParams, NetworkParams, SoftParams

__all__ = [
    "NetworkTopology", "NetworkTrace", "sample_topology",
    "simulate_soft_network", "simulate_hard_network",
    "empirical_rate", "empirical_density", "ExplosionError",
]

_CAND, _REFRESH, _GRID, _CROSS = 0, 1, 2, 3


class ExplosionError(RuntimeError):
    pass


@dataclass
class NetworkTopology:
    """Bernoulli(p_n) random digraph with H-distributed link positions.

    Edge attributes are deterministic functions of the seed through a
    counter-based hash (regenerated on demand, never stored), which is what
    makes n^2 edges affordable; `targets_of` materializes one row.
    """

    n: int
    p_n: float
    seed: int
    H: FunctionSpec
    allow_self_edges: bool = True

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n >= 1 required")
        if not (0.0 < self.p_n <= 1.0):
            raise ValueError("p_n must lie in (0, 1]")
        self._table = InverseCdfTable(self.H).table
        self.edges = EdgeSampler(
            self.n, self.p_n, self._table,
            seed_edge=hash_stream_seed(self.seed, 0xE0),
            seed_pos=hash_stream_seed(self.seed, 0xF0),
            allow_self=self.allow_self_edges)

    def targets_of(self, src: int) -> tuple[np.ndarray, np.ndarray]:
        """Present edges out of src: (target ids, link positions)."""
        return self.edges.targets_and_positions(src)

    def out_degree(self, src: int) -> int:
        return len(self.targets_of(src)[0])


def sample_topology(n: int, p_n: float, H: FunctionSpec, rng_seed: int,
                    allow_self_edges: bool = True) -> NetworkTopology:
    return NetworkTopology(n, p_n, rng_seed, H, allow_self_edges)


@dataclass
class NetworkTrace:
    grid: np.ndarray
    spike_times: list[np.ndarray]
    V_samples: np.ndarray          # (len(grid), n)
    exc_samples: np.ndarray        # (len(grid), n), cumulative soma hits
    hit_counts: np.ndarray
    event_count: int
    meta: dict = field(default_factory=dict)
    impulses: list | None = None   # per dendrite (t, x) when recorded

    def spike_count_curve(self) -> np.ndarray:
        """Total spikes before each grid time."""
        all_spikes = np.sort(np.concatenate([s for s in self.spike_times]) if self.spike_times else np.empty(0))
        return np.searchsorted(all_spikes, self.grid, side="right")

    # ----------------------------------------------------------------- exports

    def spikes_csv(self) -> str:
        buf = io.StringIO()
        buf.write("neuron,time\n")
        for j, times in enumerate(self.spike_times):
            for t in times:
                buf.write(f"{j},{t!r}\n")
        return buf.getvalue()

    def rate_csv(self, lam: FunctionSpec) -> str:
        rates = empirical_rate(self, lam, self.grid)
        buf = io.StringIO()
        buf.write("t,rate\n")
        for t, r in zip(self.grid, rates):
            buf.write(f"{t!r},{r!r}\n")
        return buf.getvalue()


class _KickState:
    """Neuron-state arrays shared with the hit-stream kernels."""

    def __init__(self, n: int, V0: np.ndarray, c0: float, c1: float,
                 w_n: float, apply_kicks: bool):
        self.V = V0.astype(np.float64).copy()
        self.t_last = np.zeros(n)
        self.budget = np.zeros(n, dtype=np.int64)
        self.exc = np.zeros(n, dtype=np.int64)
        self.c0 = c0
        self.c1 = c1
        self.w_n = w_n
        self.apply_kicks = apply_kicks


def _affine_coeffs(F: FunctionSpec) -> tuple[float, float]:
    if F.kind == "affine":
        return F.params["c0"], F.params["c1"]
    if F.kind == "constant":
        return F.params["c"], 0.0
    raise ValueError(
        "network simulation integrates the drift in closed form and needs an "
        "affine or constant F")


def _scalar_rate(spec: FunctionSpec):
    k, p = spec.kind, spec.params
    if k == "shifted_power":
        a, q = p["alpha"], p["p"]
        return lambda v: max(v - a, 0.0) ** q
    if k == "power":
        q = p["p"]
        return lambda v: v ** q
    if k == "constant":
        c = p["c"]
        return lambda v: c
    if k == "affine":
        c0, c1 = p["c0"], p["c1"]
        return lambda v: c0 + c1 * v
    return lambda v: float(spec(v))


def _flow_np(V, dt, c0, c1):
    if c1 == 0.0:
        return V + c0 * dt
    fix = -c0 / c1
    return fix + (V - fix) * np.exp(c1 * dt)


def _make_bank(backend: str, n, rho, L, theta, edges, horizon, record):
    if backend == "bucket":
        if record:
            raise ValueError("impulse recording requires the 'front' backend")
        return BucketHitBank(n, rho, L, theta, edges, horizon)
    if backend == "front":
        return FrontHitBank(n, rho, L, theta, edges, horizon, record=record)
    raise ValueError(f"unknown backend {backend!r}")


def simulate_soft_network(soft: SoftParams, net: NetworkParams,
                          topology: NetworkTopology, sample_grid,
                          rng_seed: int | None = None, *,
                          backend: str = "bucket",
                          record_impulses: bool = False,
                          delta_bound: float = 0.02,
                          kick_budget: int = 15,
                          max_events: int = 200_000_000) -> NetworkTrace:
    """Exact-in-law simulation of the soft model by thinning.

    Per neuron a dominating rate lam_bar = lambda(sup-flow over the window
    + budget*w_n) is maintained; candidates arrive at rate lam_bar and are
    accepted with probability lambda(V)/lam_bar.  The bound is re-armed after
    every spike, every delta_bound, and whenever the kick budget is spent, so
    it dominates the true intensity pathwise.
    """
    rng = np.random.default_rng(np.random.SeedSequence(
        net.seed if rng_seed is None else rng_seed))
    n, T = net.n, net.T
    c0, c1 = _affine_coeffs(soft.F)
    lam = _scalar_rate(soft.lam)
    w_n = net.w_n(soft.w)
    grid = np.asarray(sample_grid, dtype=float)

    V0 = np.maximum(sample_density(soft.f0, rng, n), soft.v_min)
    state = _KickState(n, V0, c0, c1, w_n, apply_kicks=True)
    bank = _make_bank(backend, n, soft.rho, soft.L, soft.theta,
                      topology.edges, T, record_impulses)

    heap: list[tuple] = []
    seq = 0
    epoch = np.zeros(n, dtype=np.int64)
    lam_bar = np.zeros(n)
    spikes: list[list[float]] = [[] for _ in range(n)]
    V_samples = np.empty((len(grid), n))
    exc_samples = np.empty((len(grid), n), dtype=np.int64)

    def push(t, kind, j, ep):
        nonlocal seq
        heapq.heappush(heap, (t, j, seq, kind, ep))
        seq += 1

    def arm(j: int, now: float):
        """Re-arm the dominating rate of neuron j from its current state."""
        epoch[j] += 1
        state.budget[j] = kick_budget
        v_sup = max(state.V[j], flow_affine(state.V[j], delta_bound, c0, c1))
        lb = lam(v_sup + kick_budget * w_n)
        lam_bar[j] = lb
        if lb > 0.0:
            t_cand = now + rng.standard_exponential() / lb
            if t_cand <= T:
                push(t_cand, _CAND, j, epoch[j])
        t_ref = now + delta_bound
        if t_ref <= T:
            push(t_ref, _REFRESH, j, epoch[j])

    for g, tg in enumerate(grid):
        push(tg, _GRID, -1, g)
    for j in range(n):
        arm(j, 0.0)

    events = 0
    while heap:
        t_top = heap[0][0]
        status, jh, th = bank.consume(t_top, state)
        events += 1
        if status == RESAMPLE:
            arm(jh, th)
            continue
        if status == KICK:  # front backend surfaces nothing in soft mode
            raise AssertionError("unexpected KICK status in soft loop")
        t_e, j, _s, kind, ep = heapq.heappop(heap)
        if events > max_events:
            raise ExplosionError(
                f"event budget exceeded ({max_events}) at t={t_e:.6f}; "
                f"{sum(len(s) for s in spikes)} spikes so far")
        if kind == _GRID:
            V_samples[ep] = _flow_np(state.V, t_e - state.t_last, c0, c1)
            exc_samples[ep] = state.exc
            continue
        if ep != epoch[j]:
            continue
        if kind == _REFRESH:
            state.V[j] = flow_affine(state.V[j], t_e - state.t_last[j], c0, c1)
            state.t_last[j] = t_e
            arm(j, t_e)
            continue
        # candidate
        state.V[j] = flow_affine(state.V[j], t_e - state.t_last[j], c0, c1)
        state.t_last[j] = t_e
        lam_v = lam(state.V[j])
        if lam_v > lam_bar[j] * (1.0 + 1e-12):
            raise AssertionError(
                f"thinning bound violated for neuron {j}: {lam_v} > {lam_bar[j]}")
        if rng.random() * lam_bar[j] <= lam_v:
            spikes[j].append(t_e)
            state.V[j] = soft.v_min
            if t_e + soft.theta <= T:
                bank.push_spike(t_e, j)
            arm(j, t_e)
        else:
            lb = lam_bar[j]
            t_cand = t_e + rng.standard_exponential() / lb
            if t_cand <= T:
                push(t_cand, _CAND, j, ep)

    hit_counts = bank.hit_counts()
    if not np.array_equal(hit_counts, state.exc):
        raise AssertionError("hit bookkeeping out of sync between bank and state")
    return NetworkTrace(
        grid=grid,
        spike_times=[np.asarray(s) for s in spikes],
        V_samples=V_samples,
        exc_samples=exc_samples,
        hit_counts=hit_counts,
        event_count=events,
        meta={"model": "soft", "n": n, "p_n": net.p_n, "w_n": w_n,
              "seed": net.seed if rng_seed is None else rng_seed,
              "backend": backend, "theta": soft.theta,
              "allow_self_edges": topology.allow_self_edges,
              "delta_bound": delta_bound, "kick_budget": kick_budget},
        impulses=bank.impulses if record_impulses else None,
    )


def simulate_hard_network(hard: HardParams, net: NetworkParams,
                          topology: NetworkTopology, sample_grid,
                          rng_seed: int | None = None, *,
                          backend: str = "bucket",
                          record_impulses: bool = False,
                          max_events: int = 200_000_000) -> NetworkTrace:
    """Deterministic-given-seed hard model: spike when V reaches v_max.

    Drift crossings are solved in closed form for the constant drift I; a
    kick that reaches v_max spikes immediately.  Simultaneous crossings are
    processed in neuron-id order (the heap key), a probability-zero tie.
    """
    rng = np.random.default_rng(np.random.SeedSequence(
        net.seed if rng_seed is None else rng_seed))
    n, T = net.n, net.T
    I = hard.I
    w_n = net.w_n(hard.w)
    grid = np.asarray(sample_grid, dtype=float)

    V0 = sample_density(hard.f0, rng, n)
    V0 = np.clip(V0, hard.v_min, np.nextafter(hard.v_max, hard.v_min))
    state = _KickState(n, V0, I, 0.0, w_n, apply_kicks=False)
    bank = _make_bank(backend, n, hard.rho, hard.L, hard.theta,
                      topology.edges, T, record_impulses)

    heap: list[tuple] = []
    seq = 0
    epoch = np.zeros(n, dtype=np.int64)
    spikes: list[list[float]] = [[] for _ in range(n)]
    V_samples = np.empty((len(grid), n))
    exc_samples = np.empty((len(grid), n), dtype=np.int64)

    def push(t, kind, j, ep):
        nonlocal seq
        heapq.heappush(heap, (t, j, seq, kind, ep))
        seq += 1

    def schedule_cross(j: int, now: float):
        epoch[j] += 1
        t_cross = now + (hard.v_max - state.V[j]) / I
        if t_cross <= T:
            push(t_cross, _CROSS, j, epoch[j])

    def spike(j: int, t: float):
        spikes[j].append(t)
        state.V[j] = hard.v_min
        state.t_last[j] = t
        if t + hard.theta <= T:
            bank.push_spike(t, j)
        schedule_cross(j, t)

    for g, tg in enumerate(grid):
        push(tg, _GRID, -1, g)
    for j in range(n):
        schedule_cross(j, 0.0)

    events = 0
    while heap:
        t_top = heap[0][0]
        status, jh, th = bank.consume(t_top, state)
        events += 1
        if status == KICK:
            state.V[jh] = flow_affine(state.V[jh], th - state.t_last[jh], I, 0.0) + w_n
            state.t_last[jh] = th
            state.exc[jh] += 1
            if state.V[jh] >= hard.v_max:
                spike(jh, th)
            else:
                schedule_cross(jh, th)
            continue
        t_e, j, _s, kind, ep = heapq.heappop(heap)
        if events > max_events:
            raise ExplosionError(f"event budget exceeded ({max_events}) at t={t_e:.6f}")
        if kind == _GRID:
            V_samples[ep] = state.V + I * (t_e - state.t_last)
            exc_samples[ep] = state.exc
            continue
        if ep != epoch[j]:
            continue
        # drift crossing
        spike(j, t_e)

    return NetworkTrace(
        grid=grid,
        spike_times=[np.asarray(s) for s in spikes],
        V_samples=V_samples,
        exc_samples=exc_samples,
        hit_counts=bank.hit_counts(),
        event_count=events,
        meta={"model": "hard", "n": n, "p_n": net.p_n, "w_n": w_n,
              "seed": net.seed if rng_seed is None else rng_seed,
              "backend": backend,
              "allow_self_edges": topology.allow_self_edges},
        impulses=bank.impulses if record_impulses else None,
    )


# ------------------------------------------------------------------ observables

def empirical_rate(trace: NetworkTrace, lam: FunctionSpec, t_grid) -> np.ndarray:
    """n^{-1} sum_i lambda(V_i(t)) at requested grid times."""
    t_grid = np.asarray(t_grid, dtype=float)
    idx = np.searchsorted(trace.grid, t_grid)
    ok = (idx < len(trace.grid)) & np.isclose(
        trace.grid[np.minimum(idx, len(trace.grid) - 1)], t_grid)
    if not np.all(ok):
        raise ValueError("empirical_rate times must belong to the sample grid")
    vals = np.asarray(lam(trace.V_samples[idx]))
    return vals.mean(axis=1)


def empirical_density(trace: NetworkTrace, t: float, bins: int = 50):
    """Histogram of potentials at one sample time; masses sum to 1."""
    idx = np.searchsorted(trace.grid, t)
    if idx >= len(trace.grid) or not math.isclose(trace.grid[idx], t):
        raise ValueError(f"t={t} is not a sample-grid time")
    V = trace.V_samples[idx]
    counts, edges = np.histogram(V, bins=bins)
    masses = counts / counts.sum()
    return edges, masses
