"""Holomorphic symbols and the two routes to ``psi(tL)``.

The spectral route diagonalizes ``L``; the contour route evaluates the
resolvent integral over the two rays ``r e^{+-i theta}`` and works for
non-symmetric ``L`` whose spectrum lies in a sector narrower than theta.
The two are independent and serve as oracles for each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bounds import BoundReport, ProbeRecord, fit_constant
from .grid import GridFunction, as_values
from .operators import KernelMatrix, OperatorModel
from .quadrature import log_nodes, log_trapezoid_weights


@dataclass(frozen=True)
class AnalyticSymbol:
    """``|psi(z)| <= C |z|^alpha / (1 + |z|^beta)`` on the sector ``|arg z| < sector_angle``.

    ``beta = inf`` marks exponential decay at infinity.
    """

    name: str
    func: Callable = field(repr=False)
    alpha: float
    beta: float
    derivative: Callable | None = field(default=None, repr=False)
    sector_angle: float = 0.45 * math.pi

    def __call__(self, z):
        return self.func(np.asarray(z))

    def __add__(self, other: "AnalyticSymbol") -> "AnalyticSymbol":
        d = None
        if self.derivative is not None and other.derivative is not None:
            d = lambda z, a=self.derivative, b=other.derivative: a(z) + b(z)
        return AnalyticSymbol(f"({self.name}+{other.name})",
                              lambda z, a=self.func, b=other.func: a(z) + b(z),
                              min(self.alpha, other.alpha), min(self.beta, other.beta), d,
                              min(self.sector_angle, other.sector_angle))

    def scaled(self, factor: float) -> "AnalyticSymbol":
        d = None if self.derivative is None else (lambda z, g=self.derivative: factor * g(z))
        return AnalyticSymbol(f"{factor:.6g}*{self.name}", lambda z, g=self.func: factor * g(z),
                              self.alpha, self.beta, d, self.sector_angle)

    def multiplier(self, t: float, eigenvalues: np.ndarray) -> np.ndarray:
        """``psi(t lambda)`` on a real spectrum, with ``psi(0) := 0`` when alpha > 0."""
        vals = self.func(t * eigenvalues)
        if self.alpha > 0:
            vals = np.where(eigenvalues == 0.0, 0.0, vals)
        if np.iscomplexobj(vals) and not np.any(np.imag(vals)):
            vals = vals.real
        return vals

    def satisfies_beta_condition(self, n: int, gamma: float = 1.0) -> bool:
        return self.beta > self.alpha + n + gamma + 3


BUILTIN_SYMBOLS = ("zeta_exp",)


def builtin_symbol(name: str = "zeta_exp", k: int = 1) -> AnalyticSymbol:
    """``zeta(z) = z^k e^{-z/2}``, so that ``q(z) = z^{2k+2} e^{-z}``."""
    if name not in BUILTIN_SYMBOLS:
        raise ValueError(f"unknown symbol {name!r}; available: {', '.join(BUILTIN_SYMBOLS)}")
    if int(k) != k or k < 1:
        raise ValueError(f"zeta_exp needs an integer k >= 1, got {k}")
    k = int(k)
    return AnalyticSymbol(
        f"zeta_exp({k})",
        lambda z: z**k * np.exp(-z / 2),
        alpha=float(k),
        beta=math.inf,
        derivative=lambda z: (k * z ** (k - 1) - z**k / 2) * np.exp(-z / 2),
    )


def power_heat_symbol(k: int) -> AnalyticSymbol:
    """``z^k e^{-z}``; ``k = 0`` is the heat semigroup itself."""
    return AnalyticSymbol(
        "heat" if k == 0 else f"z^{k}e^-z",
        lambda z: z**k * np.exp(-z),
        alpha=float(k),
        beta=math.inf,
        derivative=lambda z: (k * z ** (k - 1) - z**k) * np.exp(-z) if k else -np.exp(-z),
    )


def derived_q(sym: AnalyticSymbol) -> AnalyticSymbol:
    f, d = sym.func, sym.derivative
    deriv = None
    if d is not None:
        deriv = lambda z: 2 * z * f(z) ** 2 + 2 * z**2 * f(z) * d(z)
    return AnalyticSymbol(f"q[{sym.name}]", lambda z: z**2 * f(z) ** 2,
                          2 * sym.alpha + 2, 2 * sym.beta, deriv, sym.sector_angle)


def derived_phi(sym: AnalyticSymbol) -> AnalyticSymbol:
    f, d = sym.func, sym.derivative
    deriv = None
    if d is not None:
        deriv = lambda z: 2 * z * f(z) + z**2 * d(z)
    return AnalyticSymbol(f"phi[{sym.name}]", lambda z: z**2 * f(z),
                          sym.alpha + 2, sym.beta, deriv, sym.sector_angle)


def derived_qprime(sym: AnalyticSymbol) -> AnalyticSymbol:
    """Derivative ``q'`` of ``q = z^2 zeta^2``; decays one order less at the origin."""
    q = derived_q(sym)
    if q.derivative is None:
        raise ValueError(f"symbol {sym.name} has no closed-form derivative")
    return AnalyticSymbol(f"q'[{sym.name}]", q.derivative, q.alpha - 1, q.beta,
                          None, sym.sector_angle)


def z_times(sym: AnalyticSymbol) -> AnalyticSymbol:
    """``z psi(z)``, e.g. ``t^2 L q'(t^2 L)`` from ``q'``."""
    return AnalyticSymbol(f"z*{sym.name}", lambda z, g=sym.func: z * g(z),
                          sym.alpha + 1, sym.beta - 1, None, sym.sector_angle)


def fit_symbol_constant(sym: AnalyticSymbol, angles=(0.0, math.pi / 8, math.pi / 4),
                        r=None, beta: float | None = None) -> float:
    """Sampled ``sup |psi(z)| (1 + |z|^beta) / |z|^alpha`` over rays in the sector."""
    r = np.geomspace(1e-4, 1e3, 400) if r is None else r
    b = sym.beta if beta is None else beta
    best = 0.0
    for a in angles:
        z = r * np.exp(1j * a)
        with np.errstate(over="ignore", invalid="ignore"):
            ratio = np.abs(sym(z)) * (1 + r**b) / r**sym.alpha
        best = max(best, float(np.nanmax(ratio)))
    return best


@dataclass(frozen=True)
class ContourQuadrature:
    """Trapezoid rule in log-radius on the rays ``r e^{-i theta}`` (outward) and
    ``r e^{+i theta}`` (inward); radii are in units of ``1/t``."""

    theta: float = math.pi / 4
    nodes: int = 200
    r_min: float = 1e-6
    r_max: float = 1e6
    tol: float = 1e-8

    def __post_init__(self):
        if self.nodes < 16:
            raise ValueError("contour quadrature needs at least 16 nodes")
        if not 0 < self.theta < math.pi / 2:
            raise ValueError("contour angle must lie in (0, pi/2)")

    def radii(self, nodes: int | None = None) -> np.ndarray:
        return log_nodes(self.r_min, self.r_max, nodes or self.nodes)

    def doubled_radii(self) -> np.ndarray:
        """The node set with every log-midpoint inserted."""
        r = self.radii()
        mid = np.sqrt(r[:-1] * r[1:])
        return np.sort(np.concatenate([r, mid]))


def _contour_terms(matrix: np.ndarray, sym: AnalyticSymbol, t: float, rhs: np.ndarray,
                   radii: np.ndarray, theta: float) -> np.ndarray:
    """Integrand ``(lambda dlog r) psi(t lambda) (lambda - L)^{-1} rhs`` summed over both
    rays at each radius; shape ``(len(radii),) + rhs.shape``."""
    eye = np.eye(matrix.shape[0])
    out = np.zeros((len(radii),) + rhs.shape, dtype=complex)
    for branch, sign in ((-1, 1.0), (1, -1.0)):
        e = np.exp(1j * branch * theta)
        for i, r in enumerate(radii):
            lam = (r / t) * e
            coef = complex(sym(np.asarray(t * lam))) * lam * sign
            if coef == 0:
                continue
            try:
                sol = np.linalg.solve(lam * eye - matrix, rhs)
            except np.linalg.LinAlgError as exc:
                raise ValueError(f"singular resolvent at lambda={lam}") from exc
            out[i] += coef * sol
    return out / (2j * math.pi)


def _realify(values: np.ndarray, matrix: np.ndarray, rhs: np.ndarray, sym: AnalyticSymbol) -> np.ndarray:
    # real L, real data and psi real on the real axis give a real result
    if not np.iscomplexobj(rhs) and np.isrealobj(matrix) and np.isrealobj(sym(np.array([0.5, 2.0]))):
        return values.real
    return values


def contour_apply(matrix: np.ndarray, sym: AnalyticSymbol, t: float, rhs: np.ndarray,
                  quad: ContourQuadrature) -> np.ndarray:
    """``psi(tL) rhs`` by the contour rule with ``quad.nodes`` radii per ray.

    Raises if doubling the node count moves the result by more than
    ``quad.tol`` (relative).
    """
    if quad.theta >= sym.sector_angle:
        raise ValueError("contour angle must lie inside the symbol's sector")
    radii = quad.doubled_radii()
    terms = _contour_terms(matrix, sym, t, rhs, radii, quad.theta)
    tail = (np.newaxis,) * rhs.ndim
    coarse = np.sum(log_trapezoid_weights(radii[::2])[(slice(None),) + tail] * terms[::2], axis=0)
    fine = np.sum(log_trapezoid_weights(radii)[(slice(None),) + tail] * terms, axis=0)
    scale = np.linalg.norm(fine)
    if scale > 0:
        resid = np.linalg.norm(fine - coarse) / scale
        if resid > quad.tol:
            raise ValueError(f"contour quadrature under-resolved: node-doubling residual {resid:.3g} > {quad.tol:.3g}")
    return _realify(coarse, matrix, rhs, sym)


def apply_calculus(op: OperatorModel, sym: AnalyticSymbol, t: float, f, path="spectral") -> GridFunction:
    """``psi(tL) f``; ``path`` is ``"spectral"`` or a :class:`ContourQuadrature`."""
    if t <= 0:
        raise ValueError(f"need t > 0, got {t}")
    vals = as_values(f, op.domain)
    if path == "spectral":
        sp = op.spectral
        return GridFunction(op.domain, sp.multiply(sym.multiplier(t, sp.eigenvalues), vals))
    if path == "contour":
        path = ContourQuadrature()
    if not isinstance(path, ContourQuadrature):
        raise ValueError(f"unknown calculus path {path!r}")
    return GridFunction(op.domain, contour_apply(op.matrix, sym, t, vals, path))


def calculus_kernel_matrix(op: OperatorModel, sym: AnalyticSymbol, t: float, path="spectral") -> KernelMatrix:
    if t <= 0:
        raise ValueError(f"need t > 0, got {t}")
    h_n = op.domain.cell_volume
    if path == "spectral":
        sp = op.spectral
        return KernelMatrix(op.domain, sp.matrix_function(sym.multiplier(t, sp.eigenvalues)) / h_n)
    if path == "contour":
        path = ContourQuadrature()
    M = contour_apply(op.matrix, sym, t, np.eye(op.size), path)
    return KernelMatrix(op.domain, M / h_n)


def calderon_integral(qfunc, t_lo: float = 1e-8, t_hi: float = 1e3, points: int = 6000,
                      alpha: float | None = None) -> float:
    """``1/2 int_0^inf q(t)^2 dt/t`` by the shared log-trapezoid rule.

    The lower tail is bounded by ``|q(t_lo)|^2 / (2 alpha)`` (power decay of
    order ``alpha`` at the origin); the upper tail is bounded by checking the
    integrand at ``t_hi``. Either exceeding ``1e-10`` of the value is an error.
    """
    t = log_nodes(t_lo, t_hi, points)
    g = np.abs(qfunc(t)) ** 2
    value = 0.5 * float(np.sum(log_trapezoid_weights(t) * g))
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"Calderon integral is not positive and finite ({value})")
    a = alpha if alpha else 1.0
    lower_tail = 0.5 * g[0] / (2 * a)
    upper_tail = 0.5 * g[-1] * 10.0
    if max(lower_tail, upper_tail) > 1e-10 * value:
        raise ValueError("quadrature range too narrow for the Calderon integral "
                         f"(tail estimates {lower_tail:.3g}, {upper_tail:.3g})")
    return value


def calderon_constant(sym: AnalyticSymbol, t_lo: float = 1e-8, t_hi: float = 1e3, points: int = 6000) -> float:
    """``c = 1/2 int_0^inf q(t)^2 dt/t`` for ``q = z^2 zeta^2`` built from ``sym``."""
    q = derived_q(sym)
    return calderon_integral(lambda t: q(t), t_lo, t_hi, points, alpha=q.alpha)


def normalized_q(sym: AnalyticSymbol) -> AnalyticSymbol:
    """``q / sqrt(c)``: reproducing formula ``int q(t^2 L)^2 dt/t = I`` on ``(ker L)^perp``."""
    return derived_q(sym).scaled(1.0 / math.sqrt(calderon_constant(sym)))


def _small_time_cap(op: OperatorModel) -> float:
    return op.domain.side / 4


def composed_kernel(op: OperatorModel, sym_a: AnalyticSymbol, ta: float,
                    sym_b: AnalyticSymbol, tb: float) -> KernelMatrix:
    """Kernel of ``sym_a(ta L) sym_b(tb L)`` by the spectral route."""
    sp = op.spectral
    m = sym_a.multiplier(ta, sp.eigenvalues) * sym_b.multiplier(tb, sp.eigenvalues)
    return KernelMatrix(op.domain, sp.matrix_function(m) / op.domain.cell_volume)


def verify_almost_orthogonality(op: OperatorModel, sym: AnalyticSymbol, t: float, s: float,
                                which: str = "q", alpha: float = 1.0) -> BoundReport:
    """Fit ``C`` in ``|K(x,y)| <= C min(t/s, s/t) (t+s)^a / (t+s+|x-y|)^{n+a}``.

    ``K`` is the kernel of ``q(t^2 L) q(s^2 L)`` (``which="q"``) or of
    ``t^2 L q'(t^2 L) q(s^2 L)`` (``which="qprime"``); ``sym`` is ``zeta``.
    ``extra['sup_ratio']`` holds ``sup|K(t,s)| / sup|K(t,t)|``.
    """
    cap = _small_time_cap(op)
    if not (0 < t <= cap and 0 < s <= cap):
        raise ValueError(f"t, s must lie in (0, {cap}] (small-time regime)")
    q = derived_q(sym)
    first = q if which == "q" else z_times(derived_qprime(sym))
    K = composed_kernel(op, first, t * t, q, s * s).values
    K_tt = composed_kernel(op, first, t * t, q, t * t).values
    n = op.domain.dim
    d = op.domain.distance_matrix
    shape = min(t / s, s / t) * (t + s) ** alpha / (t + s + d) ** (n + alpha)
    C, loc = fit_constant(K, shape)
    rep = BoundReport("almost_orthogonality", [ProbeRecord(t, C, loc, s=s)])
    rep.extra["sup_ratio"] = float(np.max(np.abs(K)) / np.max(np.abs(K_tt)))
    rep.extra["min_ratio"] = min(t / s, s / t)
    return rep


def almost_orthogonality_slope(op: OperatorModel, sym: AnalyticSymbol, t: float,
                               ratios=(1 / 2, 1 / 4, 1 / 8, 1 / 16), which: str = "q"):
    """Regression slope of ``log sup|K(t, s)|`` against ``log(s/t)``, plus the
    per-``s`` bound reports."""
    reports = [verify_almost_orthogonality(op, sym, t, t * r, which) for r in ratios]
    sups = [rep.extra["sup_ratio"] for rep in reports]
    slope = float(np.polyfit(np.log(ratios), np.log(sups), 1)[0])
    return slope, reports


def verify_kernel_decay(op: OperatorModel, psi: AnalyticSymbol, t: float,
                        min_distance: float = 0.3) -> BoundReport:
    """Fit ``C`` in ``|K_{psi(tL)}(x,y)| <= C t^{-n/2} (t/|x-y|^2)^{n/2+alpha}`` for ``|x-y| > min_distance``."""
    K = calculus_kernel_matrix(op, psi, t).values
    n = op.domain.dim
    d = op.domain.distance_matrix
    mask = d > min_distance
    with np.errstate(divide="ignore"):
        shape = t ** (-n / 2) * (t / np.where(mask, d, 1.0) ** 2) ** (n / 2 + psi.alpha)
    C, loc = fit_constant(K, shape, mask)
    return BoundReport("kernel_decay", [ProbeRecord(t, C, loc)])


def verify_kernel_holder(op: OperatorModel, psi: AnalyticSymbol, t: float, gamma: float = 1.0,
                         local_radius: float = 6.0, noise_floor: float = 1e-10) -> BoundReport:
    """Fit ``C`` in the x-regularity estimate of ``K_{psi(tL)}`` with ``h`` one grid step.

    Admissible pairs satisfy ``2h <= sqrt(t) + |x-y|`` and
    ``|x-y| <= local_radius * sqrt(t)``; differences below ``noise_floor``
    times the kernel maximum are dropped as round-off.
    """
    dom = op.domain
    h = dom.spacing
    rt = math.sqrt(t)
    d = dom.distance_matrix
    mask = (2 * h <= rt + d) & (d <= local_radius * rt)
    if not np.any(mask):
        raise ValueError(f"no admissible (x, y, h) triples: grid step {h:.3g} too coarse for t={t:.3g}")
    K = calculus_kernel_matrix(op, psi, t).values
    diff = K[dom.shift_index(0, 1)] - K
    mask &= np.abs(diff) >= noise_floor * np.max(np.abs(K))
    n = dom.dim
    a = psi.alpha
    shape = (h / (rt + d)) ** gamma * t**a / (t + d * d) ** (n / 2 + a)
    C, loc = fit_constant(diff, shape, mask)
    return BoundReport("kernel_holder", [ProbeRecord(t, C, loc)])
