"""Space-time impulse clouds and the light-cone partial order.

Impulses live on [0, inf) x [0, L].  The order is
(s, x) <= (s', x')  iff  |x - x'| <= rho (s' - s); the map
psi(s, x) = (rho s - x, rho s + x) turns it into coordinatewise dominance in
the plane, which is what every fast algorithm here works on.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Impulse",
    "PointCloud",
    "GeneralPositionError",
    "precedes",
    "psi",
]


@dataclass(frozen=True)
class Impulse:
    t: float
    x: float

    def __post_init__(self):
        if self.t < 0:
            raise ValueError(f"impulse time must be >= 0, got {self.t}")


class GeneralPositionError(ValueError):
    """Two impulses sit exactly on each other's front lines: |dx| == rho |dt|."""

    def __init__(self, a: Impulse, b: Impulse):
        self.pair = (a, b)
        super().__init__(
            f"general position violated: |{b.x} - {a.x}| == rho*|{b.t} - {a.t}| "
            f"for impulses ({a.t}, {a.x}) and ({b.t}, {b.x})")


def psi(t, x, rho: float):
    """Cone order -> plane dominance: (u, v) = (rho t - x, rho t + x)."""
    return rho * t - x, rho * t + x


def precedes(p: Impulse, q: Impulse, rho: float) -> bool:
    """Weak cone order: p <= q iff |p.x - q.x| <= rho (q.t - p.t)."""
    return abs(p.x - q.x) <= rho * (q.t - p.t)


class PointCloud:
    """Finite impulse set in general position, sorted by (t, x).

    The constructor enforces distinctness and general position with exact
    comparison of the stored doubles: sorting the psi coordinates and checking
    adjacent equality covers every pair, since |x_j - x_i| = rho |t_j - t_i|
    holds iff u_i = u_j or v_i = v_j.
    """

    def __init__(self, impulses: Iterable[Impulse], rho: float, validate: bool = True):
        imps = sorted(impulses, key=lambda m: (m.t, m.x))
        if rho <= 0:
            raise ValueError("rho must be positive")
        self.impulses: tuple[Impulse, ...] = tuple(imps)
        self.rho = float(rho)
        self.t = np.array([m.t for m in imps], dtype=float)
        self.x = np.array([m.x for m in imps], dtype=float)
        self.u = self.rho * self.t - self.x
        self.v = self.rho * self.t + self.x
        if validate:
            self._check_general_position()

    @classmethod
    def from_arrays(cls, t, x, rho: float, validate: bool = True) -> "PointCloud":
        return cls([Impulse(float(a), float(b)) for a, b in zip(t, x)], rho, validate=validate)

    def _check_general_position(self):
        for coord in (self.u, self.v):
            order = np.argsort(coord, kind="stable")
            s = coord[order]
            dup = np.nonzero(s[1:] == s[:-1])[0]
            if len(dup):
                i, j = order[dup[0]], order[dup[0] + 1]
                raise GeneralPositionError(self.impulses[i], self.impulses[j])

    def __len__(self) -> int:
        return len(self.impulses)

    def __iter__(self):
        return iter(self.impulses)

    def restrict_before(self, t: float) -> "PointCloud":
        """Sub-cloud inside the backward cone D_t of (t, 0): x <= rho (t - s)."""
        keep = self.v <= self.rho * t
        return PointCloud.from_arrays(self.t[keep], self.x[keep], self.rho, validate=False)

    def with_impulse(self, imp: Impulse) -> "PointCloud":
        return PointCloud(list(self.impulses) + [imp], self.rho)

    # -------------------------------------------------------------------- csv

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t,x\n")
        for m in self.impulses:
            buf.write(f"{m.t!r},{m.x!r}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, rho: float) -> "PointCloud":
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        if not lines or lines[0].strip() != "t,x":
            raise ValueError("cloud CSV must start with header 't,x'")
        imps = []
        for ln in lines[1:]:
            ts, xs = ln.split(",")
            imps.append(Impulse(float(ts), float(xs)))
        return cls(imps, rho)


def sample_cloud(n: int, rho: float, rng: np.random.Generator,
                 t_lo: float = 0.0, t_hi: float = 1.0,
                 x_sampler=None, L: float = 1.0) -> PointCloud:
    """i.i.d. cloud with uniform times on [t_lo, t_hi] and positions from
    x_sampler(rng, n) (uniform on [0, L] when none is given)."""
    t = rng.uniform(t_lo, t_hi, size=n)
    x = rng.uniform(0.0, L, size=n) if x_sampler is None else x_sampler(rng, n)
    return PointCloud.from_arrays(t, x, rho)
