"""Heat-semigroup frames: atoms, the frame operator T_delta and its inverse.

Frame atoms are columns of the kernel of ``q(delta^{-2j} L)`` frozen at
the sampling point of each cube,
``psi_{j,tau} = sqrt(ln delta |Q|) q_j(., y_Q)``, and

    T f = ln delta sum_j sum_tau |Q| q_j(., y_Q) (q_j f)(y_Q).

``q`` is normalized by the Calderon constant, so ``T`` approximates the
orthogonal projector onto ``(ker L)^perp`` and ``R = P_perp - T`` is small
once the nets are fine enough. ``T`` is inverted there by the Neumann
series ``sum_k R^k``.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from .calculus import (AnalyticSymbol, ContourQuadrature, calderon_constant, contour_apply,
                       derived_q, derived_qprime, z_times)
from .dyadic import DyadicNet, DyadicParams
from .grid import GridFunction, as_values
from .operators import KernelMatrix, OperatorModel

DEFAULT_DELTAS = (1.05, 1.1, 1.2, 1.4)
DEFAULT_MS = tuple(range(1, 7))


def _spectrum_range(op: OperatorModel) -> tuple[float, float]:
    if op.is_symmetric:
        lam = op.spectral.eigenvalues
    else:
        lam = np.abs(np.linalg.eigvals(op.matrix))
        lam = np.where(lam <= 1e-11 * lam.max(), 0.0, lam)
    pos = lam[lam > 0]
    return float(pos.min()), float(pos.max())


def symbol_support(q: AnalyticSymbol, eps: float = 1e-13) -> tuple[float, float]:
    """``(s_lo, s_hi)`` outside which ``|q(s)|^2`` is below ``eps`` of its peak."""
    s = np.geomspace(1e-14, 1e8, 8000)
    g = np.abs(q(s)) ** 2
    g = np.where(np.isfinite(g), g, 0.0)
    k = int(np.argmax(g))
    small = g <= eps * g[k]
    lo = np.nonzero(small[:k])[0]
    hi = np.nonzero(small[k:])[0]
    s_lo = s[lo[-1]] if lo.size else s[0]
    s_hi = s[k + hi[0]] if hi.size else s[-1]
    return float(s_lo), float(s_hi)


def auto_scale_range(op: OperatorModel, q: AnalyticSymbol, delta: float, eps: float = 1e-13) -> tuple[int, int]:
    """Scales whose times ``delta^{-2j}`` let the bump of ``q^2`` sweep the whole
    nonzero spectrum of ``L``."""
    lam_lo, lam_hi = _spectrum_range(op)
    s_lo, s_hi = symbol_support(q, eps)
    t_min = math.sqrt(s_lo / lam_hi)
    t_max = math.sqrt(s_hi / lam_lo)
    log_d = math.log(delta)
    return math.floor(-math.log(t_max) / log_d), math.ceil(-math.log(t_min) / log_d)


class FrameCoefficients(Mapping):
    """Coefficients indexed by ``(j, tau)``; stored as one array per scale."""

    def __init__(self, per_scale: dict[int, np.ndarray], params: DyadicParams):
        self.per_scale = {j: np.asarray(v) for j, v in per_scale.items()}
        self.params = params

    def __getitem__(self, key):
        j, tau = key
        return complex(self.per_scale[j][tau])

    def __iter__(self):
        for j in sorted(self.per_scale):
            for tau in range(len(self.per_scale[j])):
                yield (j, tau)

    def __len__(self):
        return sum(len(v) for v in self.per_scale.values())

    def l2_norm(self) -> float:
        return float(math.sqrt(sum(np.sum(np.abs(v) ** 2) for v in self.per_scale.values())))

    def scaled(self, c) -> "FrameCoefficients":
        return FrameCoefficients({j: c * v for j, v in self.per_scale.items()}, self.params)

    def check_keys(self, net: DyadicNet):
        if set(self.per_scale) != set(net.scales) or any(
                len(self.per_scale[j]) != len(net.cubes(j)) for j in net.scales):
            raise ValueError("coefficient keys do not match the cube set of the net")


@dataclass
class NeumannResult:
    solution: GridFunction
    iterations: int
    residual: float
    history: list = field(default_factory=list)


@dataclass
class SearchResult:
    delta: float
    M: int
    achieved_norm: float
    achieved: bool
    table: list = field(default_factory=list)


class FrameContext:
    """Sampled kernels of ``q(delta^{-2j} L)`` for every scale of a net.

    ``cols[j]`` holds the kernel columns ``q_j(., y_Q)`` and ``rows[j]`` the
    rows ``q_j(y_Q, .)`` at the cube sampling points; they coincide up to
    transposition for self-adjoint ``L``.
    """

    def __init__(self, op: OperatorModel, zeta: AnalyticSymbol, params: DyadicParams,
                 path="spectral", min_side: float | None = None):
        self.op = op
        self.zeta = zeta
        self.params = params
        self.path = path
        self.calderon = calderon_constant(zeta)
        self.q = derived_q(zeta).scaled(1.0 / math.sqrt(self.calderon))
        self.net = DyadicNet(params, op.domain, min_side)
        self.self_adjoint = op.is_symmetric and path == "spectral"
        self.cols: dict[int, np.ndarray] = {}
        self.rows: dict[int, np.ndarray] = {}
        for j in params.scales:
            self.cols[j], self.rows[j] = self._sample(j, self.net.centers(j))
        self._T = None
        self.R_norm_estimate: float | None = None
        self._perp = None

    @property
    def domain(self):
        return self.op.domain

    @property
    def log_delta(self) -> float:
        return math.log(self.params.delta)

    def qprime_symbol(self) -> AnalyticSymbol:
        """``z q'(z)`` for the normalized ``q``."""
        return z_times(derived_qprime(self.zeta)).scaled(1.0 / math.sqrt(self.calderon))

    def _sample(self, j: int, centers: np.ndarray):
        t = self.params.time(j)
        h_n = self.domain.cell_volume
        if self.path == "spectral":
            sp = self.op.spectral
            m = self.q.multiplier(t, sp.eigenvalues)
            cols = sp.eigenvectors @ (m[:, None] * sp.eigenvectors[centers, :].T) / h_n
            return cols, cols.T
        quad = ContourQuadrature() if self.path == "contour" else self.path
        K = contour_apply(self.op.matrix, self.q, t, np.eye(self.op.size), quad) / h_n
        return K[:, centers], K[centers, :]

    def kernel(self, j: int) -> KernelMatrix:
        """Full kernel of ``q(delta^{-2j} L)`` (recomputed on each call)."""
        from .calculus import calculus_kernel_matrix

        return calculus_kernel_matrix(self.op, self.q, self.params.time(j), self.path)

    def frame_weights(self, j: int) -> np.ndarray:
        """``ln delta |Q|`` for the cubes of scale ``j``."""
        return self.log_delta * self.net.weights(j)

    @property
    def perp_projector(self) -> np.ndarray:
        if self._perp is None:
            self._perp = self.op.perp_projector() if self.op.is_symmetric else np.eye(self.op.size)
        return self._perp

    @property
    def T(self) -> np.ndarray:
        if self._T is None:
            self._T = assemble_T(self)
        return self._T

    def apply_T(self, f) -> GridFunction:
        vals = as_values(f, self.domain)
        h_n = self.domain.cell_volume
        out = np.zeros(self.op.size, dtype=np.result_type(vals, *self.cols.values()))
        for j in self.params.scales:
            out += self.cols[j] @ (self.frame_weights(j) * (self.rows[j] @ vals) * h_n)
        return GridFunction(self.domain, out)


def build_frame(op: OperatorModel, zeta: AnalyticSymbol, delta: float, M: int,
                j_range="auto", path="spectral", min_side=None) -> FrameContext:
    """Assemble a frame context; ``j_range`` is ``"auto"`` or ``(j_min, j_max)``."""
    if j_range == "auto" or j_range is None:
        q = derived_q(zeta)
        j_range = auto_scale_range(op, q, delta)
    params = DyadicParams(delta, M, int(j_range[0]), int(j_range[1]))
    return FrameContext(op, zeta, params, path, min_side)


def frame_atom(ctx: FrameContext, j: int, tau: int) -> GridFunction:
    if j not in ctx.cols or not 0 <= tau < ctx.cols[j].shape[1]:
        raise KeyError(f"cube ({j}, {tau}) not in the net")
    w = ctx.frame_weights(j)[tau]
    return GridFunction(ctx.domain, math.sqrt(w) * ctx.cols[j][:, tau])


def dual_atom(ctx: FrameContext, j: int, tau: int) -> GridFunction:
    if j not in ctx.rows or not 0 <= tau < ctx.rows[j].shape[0]:
        raise KeyError(f"cube ({j}, {tau}) not in the net")
    w = ctx.frame_weights(j)[tau]
    return GridFunction(ctx.domain, math.sqrt(w) * np.conj(ctx.rows[j][tau, :]))


def assemble_T(ctx: FrameContext) -> np.ndarray:
    """Dense matrix of ``T_delta`` acting on flat grid values."""
    if not len(ctx.params.scales):
        raise ValueError("empty scale range")
    h_n = ctx.domain.cell_volume
    if ctx.self_adjoint:
        B = np.hstack([ctx.cols[j] * np.sqrt(ctx.frame_weights(j) * h_n) for j in ctx.params.scales])
        T = B @ B.T
        return 0.5 * (T + T.T)
    dtype = np.result_type(*ctx.cols.values())
    T = np.zeros((ctx.op.size, ctx.op.size), dtype=dtype)
    for j in ctx.params.scales:
        T += (ctx.cols[j] * (ctx.frame_weights(j) * h_n)) @ ctx.rows[j]
    return T


def raw_coefficients(ctx: FrameContext, f) -> FrameCoefficients:
    """``<f, psi*_{j,tau}> = sqrt(ln delta |Q|) (q_j f)(y_Q)``."""
    vals = as_values(f, ctx.domain)
    h_n = ctx.domain.cell_volume
    per = {j: np.sqrt(ctx.frame_weights(j)) * (ctx.rows[j] @ vals) * h_n for j in ctx.params.scales}
    return FrameCoefficients(per, ctx.params)


def synthesize(ctx: FrameContext, coeffs: FrameCoefficients) -> GridFunction:
    """``sum c_{j,tau} psi_{j,tau}``."""
    coeffs.check_keys(ctx.net)
    dtype = np.result_type(*coeffs.per_scale.values(), *ctx.cols.values())
    out = np.zeros(ctx.op.size, dtype=dtype)
    for j in ctx.params.scales:
        out += ctx.cols[j] @ (np.sqrt(ctx.frame_weights(j)) * coeffs.per_scale[j])
    return GridFunction(ctx.domain, out)


def remainder_norm(T: np.ndarray, projector: np.ndarray | None = None, tol: float = 1e-6,
                   max_iter: int = 20000, seed: int = 0) -> float:
    """Spectral norm of ``R = P - T`` by power iteration on ``R^T R``.

    Iterates until the eigen-residual ``|R^T R x - sigma^2 x|`` falls below
    ``tol * sigma^2``.
    """
    P = np.eye(T.shape[0]) if projector is None else projector
    R = P - T
    rng = np.random.default_rng(seed)
    x = P @ rng.standard_normal(T.shape[0])
    if not np.any(x):
        x = rng.standard_normal(T.shape[0])
    x /= np.linalg.norm(x)
    for _ in range(max_iter):
        y = R.conj().T @ (R @ x)
        lam = float(np.real(np.vdot(x, y)))
        if lam <= 0:
            return 0.0
        if np.linalg.norm(y - lam * x) <= tol * lam:
            return math.sqrt(lam)
        x = y / np.linalg.norm(y)
    raise RuntimeError(f"power iteration did not converge in {max_iter} iterations")


def estimate_R_norm(ctx: FrameContext, tol: float = 1e-6, max_iter: int = 20000) -> float:
    ctx.R_norm_estimate = remainder_norm(ctx.T, ctx.perp_projector, tol, max_iter)
    return ctx.R_norm_estimate


def neumann_series_inverse(T: np.ndarray, f: np.ndarray, projector: np.ndarray | None = None,
                           rho: float | None = None, tol: float = 1e-10, max_iter: int = 200):
    """Partial sums ``g_K = sum_{k<=K} R^k P f`` until ``|T g - P f| <= tol |f|``.

    Returns ``(g, K, residual, history)``; ``rho`` is ``|R|`` and must be < 1.
    """
    if rho is None:
        rho = remainder_norm(T, projector)
    if rho >= 1:
        raise ValueError(f"Neumann series needs |R| < 1, got {rho:.4g}")
    b = f if projector is None else projector @ f
    scale = np.linalg.norm(f)
    if scale == 0:
        return np.zeros_like(b), 0, 0.0, [0.0]
    g = b.copy()
    r = b - T @ g
    history = [np.linalg.norm(r) / scale]
    k = 0
    while history[-1] > tol:
        if k >= max_iter:
            raise RuntimeError(f"Neumann series: residual {history[-1]:.3g} above tol after {k} iterations")
        g = g + r
        r = b - T @ g
        k += 1
        history.append(np.linalg.norm(r) / scale)
    return g, k, history[-1], history


def neumann_apply_inverse(ctx: FrameContext, f, tol: float = 1e-10, max_iter: int = 200) -> NeumannResult:
    """``T^{-1} P_perp f`` by the Neumann series; needs ``estimate_R_norm(ctx) < 1``."""
    vals = as_values(f, ctx.domain)
    rho = ctx.R_norm_estimate if ctx.R_norm_estimate is not None else estimate_R_norm(ctx)
    g, k, res, hist = neumann_series_inverse(ctx.T, vals, ctx.perp_projector, rho, tol, max_iter)
    return NeumannResult(GridFunction(ctx.domain, g), k, res, hist)


def analyze(ctx: FrameContext, f, tol: float = 1e-10, max_iter: int = 200) -> FrameCoefficients:
    """Coefficients ``<T^{-1} f, psi*_{j,tau}>``; ``synthesize`` inverts this."""
    inv = neumann_apply_inverse(ctx, f, tol, max_iter)
    coeffs = raw_coefficients(ctx, inv.solution)
    coeffs.inversion = inv
    return coeffs


def truncation_residual(ctx: FrameContext) -> float:
    """Operator norm of the two omitted neighbour scales ``j_min - 1`` and ``j_max + 1``."""
    p = ctx.params
    extra = DyadicParams(p.delta, p.M, p.j_min - 1, p.j_max + 1)
    net = DyadicNet(extra, ctx.domain, ctx.net.min_side)
    h_n = ctx.domain.cell_volume
    T = np.zeros((ctx.op.size, ctx.op.size), dtype=np.result_type(*ctx.cols.values()))
    for j in (p.j_min - 1, p.j_max + 1):
        cols, rows = ctx._sample(j, net.centers(j))
        T += (cols * (ctx.log_delta * net.weights(j) * h_n)) @ rows
    return float(np.linalg.norm(T, 2))


def search_params(op: OperatorModel, zeta: AnalyticSymbol, target_norm: float = 0.5,
                  deltas=DEFAULT_DELTAS, Ms=DEFAULT_MS, j_range="auto", path="spectral") -> SearchResult:
    """First ``(delta, M)`` in grid order (delta outer) with ``|R_delta| <= target``,
    else the minimizer flagged as not achieved."""
    table = []
    best = None
    for delta in deltas:
        for M in Ms:
            ctx = build_frame(op, zeta, delta, M, j_range, path)
            rho = estimate_R_norm(ctx)
            table.append({"delta": delta, "M": M, "R_norm": rho,
                          "j_min": ctx.params.j_min, "j_max": ctx.params.j_max})
            if best is None or rho < best[2]:
                best = (delta, M, rho)
            if rho <= target_norm:
                return SearchResult(delta, M, rho, True, table)
    return SearchResult(best[0], best[1], best[2], False, table)
