"""delta-adic nets of half-open cubes on the periodic grid."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import GridDomain
from .quadrature import log_trapezoid_weights

_EDGE_EPS = 1e-9


@dataclass(frozen=True)
class DyadicParams:
    delta: float
    M: int
    j_min: int
    j_max: int

    def __post_init__(self):
        if not 1 < self.delta <= 2:
            raise ValueError(f"delta must lie in (1, 2], got {self.delta}")
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"M must be a positive integer, got {self.M}")
        if self.j_min > self.j_max:
            raise ValueError(f"empty scale range [{self.j_min}, {self.j_max}]")

    @property
    def scales(self) -> range:
        return range(self.j_min, self.j_max + 1)

    def nominal_side(self, j: int) -> float:
        return self.delta ** (-j - self.M)

    def time(self, j: int) -> float:
        """The time ``delta^{-2j}`` at which scale ``j`` samples ``q``."""
        return self.delta ** (-2 * j)


@dataclass(frozen=True)
class Cube:
    j: int
    tau: int
    lower: tuple
    side: tuple
    center: tuple
    center_index: int
    measure: float
    weight: float
    points: np.ndarray = field(repr=False, compare=False)


@dataclass(frozen=True)
class _Axis:
    edges: np.ndarray
    member: np.ndarray


class DyadicNet:
    """Cubes of every scale in ``params.scales`` tiling the torus.

    ``min_side`` clamps the cube side from below (default: one grid step,
    so each cube holds at least one point); pass ``min_side=0`` for the raw
    ``delta^{-j-M}`` sides. A clipped seam interval that holds no grid point
    is merged into its left neighbour.
    """

    def __init__(self, params: DyadicParams, domain: GridDomain, min_side: float | None = None):
        self.params = params
        self.domain = domain
        self.min_side = domain.spacing if min_side is None else float(min_side)
        self._axes: dict[int, _Axis] = {}
        self._cubes: dict[int, list[Cube]] = {}
        self._membership: dict[int, np.ndarray] = {}
        for j in params.scales:
            self._build_scale(j)

    def side(self, j: int) -> float:
        return max(self.params.nominal_side(j), self.min_side)

    def _axis(self, j: int) -> _Axis:
        dom = self.domain
        s = self.side(j)
        count = max(1, math.ceil(dom.side / s - _EDGE_EPS))
        edges = np.minimum(np.arange(count + 1) * s, dom.side)
        edges[-1] = dom.side
        member = np.floor(dom.axis / s + _EDGE_EPS).astype(int)
        member = np.minimum(member, count - 1)
        occupied = np.bincount(member, minlength=count)
        if np.any(occupied[:-1] == 0):
            raise ValueError(f"scale j={j}: interior cubes of side {s:.4g} hold no grid points")
        if occupied[-1] == 0:
            if count == 1:
                raise ValueError(f"scale j={j}: no grid points")
            edges = np.delete(edges, -2)
            count -= 1
        return _Axis(edges, member)

    def _build_scale(self, j: int):
        dom = self.domain
        ax = self._axis(j)
        self._axes[j] = ax
        per_axis = len(ax.edges) - 1
        if dom.dim == 1:
            membership = ax.member.copy()
        else:
            a0 = np.repeat(ax.member, dom.n)
            a1 = np.tile(ax.member, dom.n)
            membership = a0 * per_axis + a1
        self._membership[j] = membership
        order = np.argsort(membership, kind="stable")
        bounds = np.searchsorted(membership[order], np.arange(per_axis**dom.dim + 1))
        cubes = []
        for tau in range(per_axis**dom.dim):
            ks = np.unravel_index(tau, (per_axis,) * dom.dim)
            lo = tuple(float(ax.edges[k]) for k in ks)
            side = tuple(float(ax.edges[k + 1] - ax.edges[k]) for k in ks)
            pts = order[bounds[tau]:bounds[tau + 1]]
            geo_center = np.array(lo) + 0.5 * np.array(side)
            d = dom.distance(dom.coords[pts], geo_center)
            c_idx = int(pts[np.argmin(d)])
            cubes.append(Cube(j, tau, lo, side, tuple(float(v) for v in dom.coords[c_idx]), c_idx,
                              float(np.prod(side)), len(pts) * dom.cell_volume, pts))
        self._cubes[j] = cubes

    @property
    def scales(self) -> range:
        return self.params.scales

    def cubes(self, j: int) -> list[Cube]:
        return self._cubes[j]

    def membership(self, j: int) -> np.ndarray:
        """Cube index ``tau`` of every grid point at scale ``j``."""
        return self._membership[j]

    def centers(self, j: int) -> np.ndarray:
        return np.array([c.center_index for c in self._cubes[j]])

    def weights(self, j: int) -> np.ndarray:
        return np.array([c.weight for c in self._cubes[j]])

    def measures(self, j: int) -> np.ndarray:
        return np.array([c.measure for c in self._cubes[j]])

    def keys(self):
        for j in self.scales:
            for c in self._cubes[j]:
                yield (j, c.tau)

    def __len__(self):
        return sum(len(c) for c in self._cubes.values())

    def cube_of_point(self, j: int, x) -> int:
        if j not in self._axes:
            raise KeyError(f"scale {j} not in the net")
        ax = self._axes[j]
        dom = self.domain
        x = np.broadcast_to(np.asarray(x, dtype=float), (dom.dim,)) % dom.side
        per_axis = len(ax.edges) - 1
        ks = [min(int(np.searchsorted(ax.edges, xi + _EDGE_EPS * self.side(j), side="right")) - 1,
                  per_axis - 1) for xi in x]
        return int(np.ravel_multi_index(ks, (per_axis,) * dom.dim))


def build_net(params: DyadicParams, domain: GridDomain, min_side: float | None = None) -> DyadicNet:
    return DyadicNet(params, domain, min_side)


def scale_sum_check(delta: float, t: float, points: int = 2_000_001, span: float = 40.0):
    """Returns ``(int_0^inf min(a/s, s/a) ds/s, sum_j min(delta^{-j}/t, t/delta^{-j}))``.

    The integral (with ``a = t``) is evaluated by the shared log-trapezoid
    rule split at the kink ``s = a``; the sum is truncated where the terms
    drop below 1e-17 and the geometric tail bound of the omitted terms is
    added, so the returned sum is an upper bound.
    """
    if not 1 < delta <= 2:
        raise ValueError(f"delta must lie in (1, 2], got {delta}")
    a = float(t)
    integral = 0.0
    for lo, hi in ((a * math.exp(-span), a), (a, a * math.exp(span))):
        s = np.geomspace(lo, hi, points)
        integral += float(np.sum(log_trapezoid_weights(s) * np.minimum(a / s, s / a)))
    # the exp(-span) tails on each side
    integral += 2 * math.exp(-span)
    j0 = -math.log(t) / math.log(delta)
    J = int(math.ceil(17 * math.log(10) / math.log(delta))) + 2
    js = np.arange(math.floor(j0) - J, math.ceil(j0) + J + 1)
    terms = np.minimum(delta ** (-js) / t, t / delta ** (-js))
    tail = 2 * terms.min() / (delta - 1)
    return integral, float(np.sum(terms) + tail)
