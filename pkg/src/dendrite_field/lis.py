"""Longest-chain functionals of an impulse cloud, three independent ways.

The chain length A(nu) of the cone order is computed by patience sorting on
the psi coordinates (the production path), by an O(n^2) dynamic program over
the precedence DAG (oracle), and as the number of peeling layers of minimal
elements (oracle).  A_t(nu) restricts to the backward cone of (t, 0), which in
psi coordinates is simply {v <= rho t}.
"""

from __future__ import annotations

from bisect import bisect_right, insort

import numpy as np
from numba import njit

from .cloud import PointCloud

__all__ = [
    "lis_count",
    "lis_count_before",
    "lis_profile",
    "lis_brute_force",
    "layer_decomposition",
]

BRUTE_FORCE_LIMIT = 10_000


def lis_count(cloud: PointCloud) -> int:
    """Length of the longest chain, by patience sorting in O(n log n).

    Sort by u ascending (ties by v ascending), then take the longest
    non-decreasing subsequence of v.  General position makes ties impossible,
    but the convention is fixed anyway.
    """
    if len(cloud) == 0:
        return 0
    order = np.lexsort((cloud.v, cloud.u))
    v = cloud.v[order]
    tails: list[float] = []
    for val in v:
        idx = bisect_right(tails, val)
        if idx == len(tails):
            tails.append(val)
        else:
            tails[idx] = val
    return len(tails)


def lis_count_before(cloud: PointCloud, t: float) -> int:
    """A_t: longest chain among impulses with x <= rho (t - s)."""
    if t < 0:
        raise ValueError("query time must be >= 0")
    return lis_count(cloud.restrict_before(t))


def lis_profile(cloud: PointCloud, t_grid) -> np.ndarray:
    """A_t for every node of an increasing time grid, in one sorted pass.

    Impulses are consumed in v order (the order their backward cones open),
    maintaining the patience piles on v; the pile count after consuming
    v <= rho t equals A_t.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) == 0:
        raise ValueError("t_grid must be a nonempty 1-d array")
    if np.any(np.diff(t_grid) <= 0) and len(t_grid) > 1:
        raise ValueError("t_grid must be strictly increasing")
    if len(cloud) == 0:
        return np.zeros(len(t_grid), dtype=np.int64)
    order = np.argsort(cloud.v, kind="stable")
    v_sorted = cloud.v[order]
    u_sorted = cloud.u[order]
    return _profile_kernel(v_sorted, u_sorted, cloud.rho * t_grid)


@njit(cache=True)
def _profile_kernel(v_sorted, u_sorted, v_thresholds):
    n = v_sorted.shape[0]
    tails = np.empty(n, dtype=np.float64)
    ntail = 0
    out = np.zeros(v_thresholds.shape[0], dtype=np.int64)
    k = 0
    for g in range(v_thresholds.shape[0]):
        lim = v_thresholds[g]
        while k < n and v_sorted[k] <= lim:
            u = u_sorted[k]
            # first pile strictly above u (longest non-decreasing subsequence)
            lo, hi = 0, ntail
            while lo < hi:
                mid = (lo + hi) // 2
                if tails[mid] <= u:
                    lo = mid + 1
                else:
                    hi = mid
            tails[lo] = u
            if lo == ntail:
                ntail += 1
            k += 1
        out[g] = ntail
    return out


def lis_brute_force(cloud: PointCloud) -> int:
    """Longest chain by O(n^2) dynamic programming over the precedence DAG."""
    n = len(cloud)
    if n > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute-force LIS limited to n <= {BRUTE_FORCE_LIMIT}, got {n}")
    if n == 0:
        return 0
    order = np.lexsort((cloud.v, cloud.u))
    u = cloud.u[order]
    v = cloud.v[order]
    return int(_brute_kernel(u, v))


@njit(cache=True)
def _brute_kernel(u, v):
    n = u.shape[0]
    dp = np.ones(n, dtype=np.int64)
    best = 1
    for i in range(n):
        for j in range(i):
            if u[j] <= u[i] and v[j] <= v[i] and dp[j] + 1 > dp[i]:
                dp[i] = dp[j] + 1
        if dp[i] > best:
            best = dp[i]
    return best


def layer_decomposition(cloud: PointCloud) -> list[list[int]]:
    """Peel successive sets of minimal elements; returns impulse indices.

    G_1 holds the minimal points for the strict order, G_{k+1} the minimal
    points of what remains.  The number of layers equals A(nu); every layer is
    an antichain and each point of G_{k+1} has a predecessor in G_k.
    """
    n = len(cloud)
    if n == 0:
        return []
    # depth(M) = longest chain ending at M; layer k collects depth-k points.
    order = np.lexsort((cloud.v, cloud.u))
    u = cloud.u[order]
    v = cloud.v[order]
    depth = _depth_kernel(u, v)
    layers: list[list[int]] = [[] for _ in range(int(depth.max()))]
    for pos, d in enumerate(depth):
        layers[d - 1].append(int(order[pos]))
    return layers


@njit(cache=True)
def _depth_kernel(u, v):
    n = u.shape[0]
    depth = np.ones(n, dtype=np.int64)
    for i in range(n):
        for j in range(i):
            if u[j] <= u[i] and v[j] <= v[i] and depth[j] + 1 > depth[i]:
                depth[i] = depth[j] + 1
    return depth
