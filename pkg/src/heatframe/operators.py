"""Finite-difference operators on the periodic grid and their heat semigroups."""

from __future__ import annotations

import hashlib
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bounds import BoundReport, ProbeRecord, fit_constant
from .grid import GridDomain, GridFunction, as_values

KINDS = ("laplacian", "schrodinger", "divergence_form")
_KIND_TAGS = {"laplacian": 0, "schrodinger": 1, "divergence_form": 2, "custom": 3}

_CACHE_MAGIC = b"HFRM"
_CACHE_VERSION = 1
_CACHE_HEADER = struct.Struct("<4sIIII32s")

# eigenvalues below this fraction of the spectral radius are treated as exact zeros
NULL_TOL = 1e-11


@dataclass(frozen=True)
class SpectralData:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def multiply(self, multiplier: np.ndarray, values: np.ndarray) -> np.ndarray:
        """``V diag(multiplier) V^T values`` for a vector or a stack of columns."""
        V = self.eigenvectors
        coef = V.T @ values
        if coef.ndim == 1:
            return V @ (multiplier * coef)
        return V @ (multiplier[:, None] * coef)

    def matrix_function(self, multiplier: np.ndarray) -> np.ndarray:
        V = self.eigenvectors
        return (V * multiplier) @ V.T


@dataclass
class OperatorModel:
    """A real discretized operator ``L`` acting on flat grid values."""

    kind: str
    domain: GridDomain
    matrix: np.ndarray = field(repr=False)
    potential: np.ndarray | None = field(default=None, repr=False)
    coefficient: np.ndarray | None = field(default=None, repr=False)
    _spectral: SpectralData | None = field(default=None, init=False, repr=False, compare=False)

    @classmethod
    def from_matrix(cls, domain: GridDomain, matrix) -> "OperatorModel":
        """Wrap an arbitrary (possibly non-symmetric) matrix; used for contour-path demos."""
        matrix = np.asarray(matrix, dtype=float)
        if matrix.shape != (domain.size, domain.size):
            raise ValueError("matrix shape does not match the domain")
        return cls("custom", domain, matrix)

    @property
    def size(self) -> int:
        return self.domain.size

    @property
    def is_symmetric(self) -> bool:
        A = self.matrix
        return bool(np.max(np.abs(A - A.T)) <= 1e-12 * max(np.max(np.abs(A)), 1.0))

    @property
    def spectral(self) -> SpectralData:
        if self._spectral is None:
            spectral_decompose(self)
        return self._spectral

    def parameter_hash(self) -> bytes:
        h = hashlib.sha256()
        h.update(self.kind.encode())
        h.update(struct.pack("<IId", self.domain.dim, self.domain.n, self.domain.side))
        for arr in (self.potential, self.coefficient):
            if arr is not None:
                h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        if self.kind == "custom":
            h.update(np.ascontiguousarray(self.matrix, dtype="<f8").tobytes())
        return h.digest()

    def null_mask(self) -> np.ndarray:
        lam = self.spectral.eigenvalues
        return lam == 0.0

    def perp_projector(self) -> np.ndarray:
        """Orthogonal projector onto the complement of ``ker L``."""
        V = self.spectral.eigenvectors
        null = self.null_mask()
        P = np.eye(self.size)
        if np.any(null):
            Vn = V[:, null]
            P -= Vn @ Vn.T
        return P

    def apply(self, f) -> GridFunction:
        return GridFunction(self.domain, self.matrix @ as_values(f, self.domain))


@dataclass(frozen=True)
class KernelMatrix:
    """Kernel density ``K(x, y)``; operator application is ``K @ (h^dim f)``."""

    domain: GridDomain
    values: np.ndarray = field(repr=False)

    @property
    def measure_weight(self) -> float:
        return self.domain.cell_volume

    def apply(self, f) -> GridFunction:
        return GridFunction(self.domain, self.values @ (self.measure_weight * as_values(f, self.domain)))

    def compose(self, other: "KernelMatrix") -> "KernelMatrix":
        """Kernel of the product operator, ``int K1(x,z) K2(z,y) dz``."""
        return KernelMatrix(self.domain, self.values @ other.values * self.measure_weight)


def _periodic_difference(n: int, h: float) -> np.ndarray:
    """Forward difference ``(f(x+h) - f(x)) / h`` with wraparound."""
    D = -np.eye(n)
    D[np.arange(n), (np.arange(n) + 1) % n] += 1.0
    return D / h


def _axis_operator(domain: GridDomain, one_d: np.ndarray, axis: int) -> np.ndarray:
    if domain.dim == 1:
        return one_d
    eye = np.eye(domain.n)
    return np.kron(one_d, eye) if axis == 0 else np.kron(eye, one_d)


def _field_values(field_, domain: GridDomain, name: str) -> np.ndarray:
    if isinstance(field_, GridFunction):
        if field_.domain != domain:
            raise ValueError(f"{name} field is defined on a different domain")
        vals = field_.values
    elif np.isscalar(field_):
        vals = np.full(domain.size, float(field_))
    else:
        vals = np.asarray(field_)
        if vals.size != domain.size:
            raise ValueError(f"{name} field has {vals.size} values, domain has {domain.size}")
    if np.iscomplexobj(vals):
        if np.any(vals.imag):
            raise ValueError(f"{name} field must be real")
        vals = vals.real
    return np.asarray(vals, dtype=float).reshape(-1)


def laplacian_matrix(domain: GridDomain) -> np.ndarray:
    h = domain.spacing
    n = domain.n
    one_d = 2.0 * np.eye(n)
    one_d[np.arange(n), (np.arange(n) + 1) % n] -= 1.0
    one_d[np.arange(n), (np.arange(n) - 1) % n] -= 1.0
    one_d /= h * h
    return sum(_axis_operator(domain, one_d, k) for k in range(domain.dim))


def build_operator(kind: str, domain: GridDomain, potential=None, coefficient=None,
                   a_min: float = 0.0) -> OperatorModel:
    """Second-order centred finite differences with periodic wraparound.

    ``schrodinger`` adds ``diag(V)`` to the laplacian; ``divergence_form``
    is ``sum_k D_k^T diag(A_mid) D_k`` with ``A`` averaged onto the cell
    midpoints ``x + h e_k / 2``, which keeps the matrix exactly symmetric.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown operator kind {kind!r}; valid kinds: {', '.join(KINDS)}")
    if kind == "laplacian":
        return OperatorModel(kind, domain, laplacian_matrix(domain))
    if kind == "schrodinger":
        if potential is None:
            raise ValueError("schrodinger operator needs a potential")
        V = _field_values(potential, domain, "potential")
        if np.any(V < 0):
            raise ValueError("potential must be nonnegative")
        return OperatorModel(kind, domain, laplacian_matrix(domain) + np.diag(V), potential=V)

    if coefficient is None:
        raise ValueError("divergence_form operator needs a coefficient field")
    A = _field_values(coefficient, domain, "coefficient")
    if np.min(A) <= a_min:
        raise ValueError(f"coefficient must be bounded below by a positive constant (min {np.min(A)})")
    D1 = _periodic_difference(domain.n, domain.spacing)
    L = np.zeros((domain.size, domain.size))
    for k in range(domain.dim):
        Dk = _axis_operator(domain, D1, k)
        mid = 0.5 * (A + A[domain.shift_index(k, 1)])
        L += Dk.T @ (mid[:, None] * Dk)
    return OperatorModel(kind, domain, L, coefficient=A)


def _cache_path(op: OperatorModel, cache_dir) -> Path:
    return Path(cache_dir) / f"{op.kind}-{op.parameter_hash().hex()[:20]}.hfrm"


def write_spectral_cache(path, op: OperatorModel, spectral: SpectralData) -> None:
    """Header (magic, version, dim, N, kind tag, sha256 parameter hash) then
    row-major little-endian float64 eigenvalues and eigenvectors."""
    header = _CACHE_HEADER.pack(_CACHE_MAGIC, _CACHE_VERSION, op.domain.dim, op.domain.n,
                                _KIND_TAGS[op.kind], op.parameter_hash())
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(spectral.eigenvalues, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(spectral.eigenvectors, dtype="<f8").tobytes())
    os.replace(tmp, path)


def read_spectral_cache(path, op: OperatorModel) -> SpectralData | None:
    """Load cached spectral data; ``None`` if the file belongs to another operator."""
    data = Path(path).read_bytes()
    if len(data) < _CACHE_HEADER.size:
        return None
    magic, version, dim, n, tag, digest = _CACHE_HEADER.unpack_from(data)
    if (magic != _CACHE_MAGIC or version != _CACHE_VERSION or dim != op.domain.dim
            or n != op.domain.n or tag != _KIND_TAGS[op.kind] or digest != op.parameter_hash()):
        return None
    P = op.size
    body = np.frombuffer(data, dtype="<f8", offset=_CACHE_HEADER.size)
    if body.size != P + P * P:
        return None
    return SpectralData(body[:P].copy(), body[P:].reshape(P, P).copy())


def spectral_decompose(op: OperatorModel, cache_dir=None) -> SpectralData:
    """Eigendecomposition of a symmetric operator, cached on ``op`` (and on disk
    when ``cache_dir`` is given)."""
    if op._spectral is not None:
        return op._spectral
    if not op.is_symmetric:
        raise ValueError("matrix is not symmetric; use the contour path of the functional calculus")
    path = None
    if cache_dir is not None:
        Path(cache_dir).mkdir(parents=True, exist_ok=True)
        path = _cache_path(op, cache_dir)
        if path.exists():
            cached = read_spectral_cache(path, op)
            if cached is not None:
                op._spectral = cached
                return cached
    A = 0.5 * (op.matrix + op.matrix.T)
    lam, V = np.linalg.eigh(A)
    scale = max(np.max(np.abs(lam)), 1.0)
    lam = np.where(np.abs(lam) <= NULL_TOL * scale, 0.0, lam)
    spectral = SpectralData(lam, V)
    op._spectral = spectral
    if path is not None:
        write_spectral_cache(path, op, spectral)
    return spectral


def is_cached(op: OperatorModel, cache_dir) -> bool:
    return cache_dir is not None and _cache_path(op, cache_dir).exists()


def heat_semigroup_apply(op: OperatorModel, t: float, f) -> GridFunction:
    """``e^{-tL} f`` by the spectral route."""
    if t < 0:
        raise ValueError(f"heat semigroup needs t >= 0, got {t}")
    vals = as_values(f, op.domain)
    if t == 0:
        return GridFunction(op.domain, vals.copy())
    sp = op.spectral
    return GridFunction(op.domain, sp.multiply(np.exp(-t * sp.eigenvalues), vals))


def heat_kernel_matrix(op: OperatorModel, t: float) -> KernelMatrix:
    if t <= 0:
        raise ValueError(f"heat kernel needs t > 0, got {t}")
    sp = op.spectral
    return KernelMatrix(op.domain, sp.matrix_function(np.exp(-t * sp.eigenvalues)) / op.domain.cell_volume)


def centered_gradient_rows(domain: GridDomain, values: np.ndarray) -> list[np.ndarray]:
    """Centred x-differences along each axis of the leading (row) index."""
    h = domain.spacing
    out = []
    for k in range(domain.dim):
        fwd = domain.shift_index(k, 1)
        bwd = domain.shift_index(k, -1)
        out.append((values[fwd] - values[bwd]) / (2 * h))
    return out


def gradient_heat_kernel(op: OperatorModel, t: float) -> list[KernelMatrix]:
    """Centred-difference x-gradient of the heat kernel, one matrix per axis."""
    K = heat_kernel_matrix(op, t)
    return [KernelMatrix(op.domain, G) for G in centered_gradient_rows(op.domain, K.values)]


def verify_gaussian_bound(op: OperatorModel, t_list, margin: float = 0.1, c_ref: float = 4.0,
                          noise_floor: float = 1e-8, ceiling: float | None = None) -> BoundReport:
    """Fit ``C`` in ``|p_t(x,y)| <= C t^{-n/2} exp(-|x-y|^2 / (c t))``, ``c = 4(1+margin)``.

    Pairs where the reference Gaussian ``exp(-d^2/4t)`` is below
    ``noise_floor`` are excluded; there the kernel is at the level of the
    eigensolver round-off and the ratio is meaningless.
    """
    t_list = list(t_list)
    if not t_list:
        raise ValueError("empty t_list")
    t_cap = (op.domain.side / 4) ** 2 / c_ref
    for t in t_list:
        if not 0 < t <= t_cap:
            raise ValueError(f"t={t} outside the small-time regime (0, {t_cap:.4g}] where wraparound is negligible")
    n = op.domain.dim
    c = 4.0 * (1.0 + margin)
    d2 = op.domain.distance_matrix ** 2
    report = BoundReport("gaussian_bound", ceiling=ceiling, extra={"c": c})
    for t in t_list:
        K = heat_kernel_matrix(op, t).values
        shape = t ** (-n / 2) * np.exp(-d2 / (c * t))
        mask = np.exp(-d2 / (4 * t)) >= noise_floor
        C, loc = fit_constant(K, shape, mask)
        report.records.append(ProbeRecord(t, C, loc))
    return report
