"""L^p norms, square and g-functions, and maximal functions on the grid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calculus import AnalyticSymbol, apply_calculus, derived_q
from .grid import GridDomain, GridFunction, as_values
from .operators import OperatorModel, centered_gradient_rows
from .quadrature import log_nodes, log_trapezoid_weights

BAND_NODES = 9
_BALL_EPS = 1e-12


@dataclass(frozen=True)
class ConeParams:
    """Time samples of a cone ``|x - y| < aperture * t``."""

    t_grid: tuple
    aperture: float = 1.0

    def __post_init__(self):
        t = np.asarray(self.t_grid, dtype=float)
        if t.size == 0:
            raise ValueError("t_grid is empty")
        if np.any(t <= 0) or np.any(np.diff(t) <= 0):
            raise ValueError("t_grid must be positive and strictly increasing")
        if self.aperture <= 0:
            raise ValueError("aperture must be positive")
        object.__setattr__(self, "t_grid", tuple(float(v) for v in t))

    @classmethod
    def default(cls, domain: GridDomain, nodes: int = 48, aperture: float = 1.0) -> "ConeParams":
        return cls(tuple(log_nodes(2 * domain.spacing, domain.side / 2, nodes)), aperture)

    @property
    def times(self) -> np.ndarray:
        return np.asarray(self.t_grid)

    def with_aperture(self, aperture: float) -> "ConeParams":
        return ConeParams(self.t_grid, aperture)

    def check(self, domain: GridDomain):
        if self.t_grid[-1] > domain.side / 2 * (1 + 1e-12):
            raise ValueError(f"t_max {self.t_grid[-1]} exceeds half the side length")
        if self.aperture * self.t_grid[-1] <= domain.spacing:
            raise ValueError("cone is empty at every sampled time (t below the grid spacing)")


def lp_norm(f, p: float = 2.0, domain: GridDomain | None = None) -> float:
    """``(sum |f|^p h^dim)^{1/p}``; ``p = inf`` gives the max."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if isinstance(f, GridFunction):
        domain = f.domain
    if domain is None:
        raise ValueError("a domain is needed for a bare array")
    a = np.abs(as_values(f, domain))
    if np.isinf(p):
        return float(a.max())
    return float((np.sum(a**p) * domain.cell_volume) ** (1 / p))


def _evolve(op: OperatorModel, sym: AnalyticSymbol, times, f, path="spectral") -> np.ndarray:
    """Columns ``sym(t^2 L) f`` for every ``t`` in ``times``."""
    vals = as_values(f, op.domain)
    times = np.asarray(times, dtype=float)
    if path == "spectral" and op.is_symmetric:
        sp = op.spectral
        fhat = sp.eigenvectors.T @ vals
        mult = np.stack([sym.multiplier(t * t, sp.eigenvalues) for t in times], axis=1)
        return sp.eigenvectors @ (mult * fhat[:, None])
    return np.stack([apply_calculus(op, sym, t * t, vals, path).values for t in times], axis=1)


def _heat_stack(op: OperatorModel, times, f) -> np.ndarray:
    """Columns ``e^{-t^2 L} f``."""
    vals = as_values(f, op.domain)
    sp = op.spectral
    fhat = sp.eigenvectors.T @ vals
    decay = np.exp(-np.outer(sp.eigenvalues, np.asarray(times, dtype=float) ** 2))
    return sp.eigenvectors @ (decay * fhat[:, None])


def square_function_SL(op: OperatorModel, sym: AnalyticSymbol, f, cone: ConeParams | None = None) -> GridFunction:
    """Cone square function of ``q(t^2 L) f`` with ``q = z^2 zeta(z)^2``.

    ``S(x)^2 = sum_t w_t t^{-n} sum_{|x-y| < a t} |q(t^2 L) f(y)|^2 h^n``
    with log-trapezoid weights ``w_t``.
    """
    dom = op.domain
    cone = cone or ConeParams.default(dom)
    cone.check(dom)
    t = cone.times
    U2 = np.abs(_evolve(op, derived_q(sym), t, f)) ** 2
    D = dom.distance_matrix
    w = log_trapezoid_weights(t) if t.size > 1 else np.ones(1)
    S2 = np.zeros(dom.size)
    for k, tk in enumerate(t):
        ball = D < cone.aperture * tk
        S2 += w[k] * tk ** (-dom.dim) * dom.cell_volume * (ball @ U2[:, k])
    return GridFunction(dom, np.sqrt(S2))


def _band_times(delta: float, j: int, nodes: int = BAND_NODES) -> np.ndarray:
    return np.geomspace(delta ** (-j), delta ** (-j + 1), nodes)


def g_function(which: int, ctx, f, band_nodes: int = BAND_NODES) -> GridFunction:
    """The four scale-discretized g-functions of a frame context.

    1: ``ln delta sum |q_j f(y_Q)|^2 chi_Q``; 2: the band integral
    ``int_{delta^{-j}}^{delta^{-j+1}} |q(t^2 L) f(y_Q)|^2 dt/t`` per cube;
    3: the same integral averaged over the cube; 4: as 2 with
    ``s^2 L q'(s^2 L)`` in place of ``q``.
    """
    if which not in (1, 2, 3, 4):
        raise ValueError(f"g-function index must be 1, 2, 3 or 4, got {which}")
    dom = ctx.domain
    vals = as_values(f, dom)
    delta = ctx.params.delta
    G2 = np.zeros(dom.size)
    if which == 1:
        for j in ctx.params.scales:
            coef = ctx.rows[j] @ vals * dom.cell_volume
            G2 += ctx.log_delta * np.abs(coef[ctx.net.membership(j)]) ** 2
        return GridFunction(dom, np.sqrt(G2))
    sym = ctx.qprime_symbol() if which == 4 else ctx.q
    for j in ctx.params.scales:
        t = _band_times(delta, j, band_nodes)
        band = np.abs(_evolve(ctx.op, sym, t, vals, ctx.path)) ** 2 @ log_trapezoid_weights(t)
        member = ctx.net.membership(j)
        if which == 3:
            counts = np.bincount(member, minlength=len(ctx.net.cubes(j)))
            per_cube = np.bincount(member, weights=band, minlength=counts.size) / counts
        else:
            per_cube = band[ctx.net.centers(j)]
        G2 += per_cube[member]
    return GridFunction(dom, np.sqrt(G2))


def continuous_g_function(op: OperatorModel, q: AnalyticSymbol, f, t_grid) -> GridFunction:
    """``(int |q(t^2 L) f(x)|^2 dt/t)^{1/2}`` on the sampled times."""
    t = np.asarray(t_grid, dtype=float)
    G2 = np.abs(_evolve(op, q, t, f)) ** 2 @ log_trapezoid_weights(t)
    return GridFunction(op.domain, np.sqrt(G2))


def coefficient_norm(coeffs, net, p: float = 2.0) -> float:
    """``L^p`` norm of ``(sum |c_{j,tau}|^2 |Q|^{-1} chi_Q)^{1/2}``."""
    coeffs.check_keys(net)
    dom = net.domain
    G2 = np.zeros(dom.size)
    for j in net.scales:
        c2 = np.abs(coeffs.per_scale[j]) ** 2 / net.weights(j)
        G2 += c2[net.membership(j)]
    return lp_norm(np.sqrt(G2), p, dom)


def radial_maximal(op: OperatorModel, f, t_grid) -> GridFunction:
    """``sup_t |e^{-t^2 L} f|`` over the sampled times."""
    t = np.asarray(t_grid, dtype=float)
    if t.size == 0:
        raise ValueError("t_grid is empty")
    return GridFunction(op.domain, np.abs(_heat_stack(op, t, f)).max(axis=1))


def _cone_sup(domain: GridDomain, U: np.ndarray, times, aperture: float) -> np.ndarray:
    D = domain.distance_matrix
    out = np.zeros(domain.size)
    for k, tk in enumerate(times):
        ball = D < aperture * tk
        out = np.maximum(out, np.where(ball, U[None, :, k], 0.0).max(axis=1))
    return out


def nontangential_maximal(op: OperatorModel, f, cone: ConeParams | None = None) -> GridFunction:
    """``sup_{|x-y| < a t} |e^{-t^2 L} f(y)|``."""
    dom = op.domain
    cone = cone or ConeParams.default(dom)
    cone.check(dom)
    U = np.abs(_heat_stack(op, cone.times, f))
    return GridFunction(dom, _cone_sup(dom, U, cone.times, cone.aperture))


def gradient_nt_maximal(op: OperatorModel, f, cone: ConeParams | None = None) -> GridFunction:
    """``sup_{|x-y| < a t} t |grad e^{-t^2 L} f(y)|`` with centred differences (default aperture 2)."""
    dom = op.domain
    cone = cone or ConeParams.default(dom, aperture=2.0)
    cone.check(dom)
    t = cone.times
    H = _heat_stack(op, t, f)
    grads = centered_gradient_rows(dom, H)
    G = np.sqrt(sum(np.abs(g) ** 2 for g in grads)) * t[None, :]
    return GridFunction(dom, _cone_sup(dom, G, t, cone.aperture))


def hl_maximal(f, domain: GridDomain | None = None, max_radius: float | None = None) -> GridFunction:
    """Hardy-Littlewood maximal function over closed torus balls of radii ``k h``.

    Radii run over every multiple of the spacing up to ``max_radius``
    (default half the side). Ball averages are discrete means of ``|f|``.
    """
    if isinstance(f, GridFunction):
        domain = f.domain
    if domain is None:
        raise ValueError("a domain is needed for a bare array")
    a = np.abs(as_values(f, domain))
    h = domain.spacing
    r_max = domain.side / 2 if max_radius is None else max_radius
    D = domain.distance_matrix
    order = np.argsort(D, axis=1, kind="stable")
    # the torus is translation invariant, so the sorted distance profile is shared by all rows
    profile = D[0, order[0]]
    csum = np.cumsum(a[order], axis=1)
    radii = h * np.arange(0, int(np.floor(r_max / h + 1e-9)) + 1)
    counts = np.searchsorted(profile, radii * (1 + _BALL_EPS) + _BALL_EPS, side="right")
    counts = np.unique(counts)
    avgs = csum[:, counts - 1] / counts[None, :]
    return GridFunction(domain, avgs.max(axis=1))
