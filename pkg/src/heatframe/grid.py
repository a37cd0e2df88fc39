"""Periodic grids and the scalar fields that live on them."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

DEFAULT_MAX_POINTS = 4096

_GF_MAGIC = b"HFGF"
_GF_HEADER = struct.Struct("<4sII")


@dataclass(frozen=True)
class GridDomain:
    """Uniform periodic grid on the torus ``[0, side)^dim``.

    Points are stored in row-major (C) order, so flat index ``i`` of a 2D
    grid corresponds to ``(i // n, i % n)``.
    """

    dim: int
    n: int
    side: float = 1.0
    max_points: int = DEFAULT_MAX_POINTS

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.n < 2:
            raise ValueError(f"need at least 2 points per axis, got {self.n}")
        if not self.side > 0:
            raise ValueError(f"side length must be positive, got {self.side}")
        if self.n**self.dim > self.max_points:
            raise ValueError(
                f"grid of {self.n}^{self.dim} = {self.n**self.dim} points exceeds "
                f"the cap of {self.max_points}"
            )

    @property
    def spacing(self) -> float:
        return self.side / self.n

    @property
    def size(self) -> int:
        return self.n**self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @property
    def volume(self) -> float:
        return self.side**self.dim

    @cached_property
    def axis(self) -> np.ndarray:
        return np.arange(self.n) * self.spacing

    @cached_property
    def coords(self) -> np.ndarray:
        """Array of shape (size, dim) with the coordinates of every point."""
        mesh = np.meshgrid(*([self.axis] * self.dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def wrap(self, delta):
        """Map coordinate differences onto ``[-side/2, side/2)``."""
        delta = np.asarray(delta, dtype=float)
        return (delta + 0.5 * self.side) % self.side - 0.5 * self.side

    def distance(self, x, y) -> np.ndarray:
        """Torus distance between point arrays ``x`` and ``y`` (broadcasting)."""
        d = self.wrap(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
        return np.sqrt(np.sum(d * d, axis=-1))

    @cached_property
    def distance_matrix(self) -> np.ndarray:
        """Pairwise torus distances, shape (size, size)."""
        c = self.coords
        return self.distance(c[:, None, :], c[None, :, :])

    def distances_from(self, point) -> np.ndarray:
        return self.distance(self.coords, np.broadcast_to(point, (self.dim,)))

    def nearest_index(self, point) -> int:
        """Flat index of the grid point closest to ``point`` on the torus."""
        return int(np.argmin(self.distances_from(point)))

    def shift_index(self, axis: int, step: int) -> np.ndarray:
        """Flat indices of the neighbours ``x + step * h * e_axis``."""
        idx = np.arange(self.size).reshape(self.shape)
        return np.roll(idx, -step, axis=axis).ravel()


@dataclass
class GridFunction:
    """Values of a scalar field at every grid point, in flat order."""

    domain: GridDomain
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.dtype.kind not in "fc":
            values = values.astype(float)
        values = values.reshape(-1)
        if values.size != self.domain.size:
            raise ValueError(
                f"expected {self.domain.size} values for the domain, got {values.size}"
            )
        self.values = values

    @classmethod
    def from_callable(cls, domain: GridDomain, func) -> "GridFunction":
        """Sample ``func`` at the grid coordinates (called with the (size, dim) array)."""
        return cls(domain, func(domain.coords))

    @classmethod
    def constant(cls, domain: GridDomain, value=1.0) -> "GridFunction":
        return cls(domain, np.full(domain.size, value, dtype=np.result_type(value, float)))

    @classmethod
    def zeros(cls, domain: GridDomain) -> "GridFunction":
        return cls(domain, np.zeros(domain.size))

    def inner(self, other: "GridFunction") -> complex:
        """``<f, g> = sum f conj(g) h^dim``."""
        _check_same_domain(self, other)
        return complex(np.sum(self.values * np.conj(other.values)) * self.domain.cell_volume)

    def norm(self, p: float = 2.0) -> float:
        from .norms import lp_norm

        return lp_norm(self, p)

    def __add__(self, other):
        if isinstance(other, GridFunction):
            _check_same_domain(self, other)
            return GridFunction(self.domain, self.values + other.values)
        return GridFunction(self.domain, self.values + other)

    def __sub__(self, other):
        if isinstance(other, GridFunction):
            _check_same_domain(self, other)
            return GridFunction(self.domain, self.values - other.values)
        return GridFunction(self.domain, self.values - other)

    def __mul__(self, scalar):
        return GridFunction(self.domain, self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.domain, -self.values)

    def reshaped(self) -> np.ndarray:
        return self.values.reshape(self.domain.shape)


def _check_same_domain(f: GridFunction, g: GridFunction):
    if f.domain != g.domain:
        raise ValueError("grid functions live on different domains")


def as_values(f, domain: GridDomain | None = None) -> np.ndarray:
    """Return the flat value array of a GridFunction (or array), checking the domain."""
    if isinstance(f, GridFunction):
        if domain is not None and f.domain != domain:
            raise ValueError("grid function lives on a different domain")
        return f.values
    values = np.asarray(f)
    if domain is not None and values.size != domain.size:
        raise ValueError(f"expected {domain.size} values, got {values.size}")
    return values.reshape(-1)


def write_grid_function(path, f: GridFunction) -> None:
    """Binary layout: magic ``HFGF``, u32 dim, u32 N, then (re, im) float64 pairs, little-endian."""
    vals = np.asarray(f.values, dtype=np.complex128)
    pairs = np.empty((vals.size, 2), dtype="<f8")
    pairs[:, 0] = vals.real
    pairs[:, 1] = vals.imag
    with open(path, "wb") as fh:
        fh.write(_GF_HEADER.pack(_GF_MAGIC, f.domain.dim, f.domain.n))
        fh.write(pairs.tobytes())


def read_grid_function(path, side: float = 1.0, max_points: int = DEFAULT_MAX_POINTS) -> GridFunction:
    data = Path(path).read_bytes()
    if len(data) < _GF_HEADER.size:
        raise ValueError(f"{path}: truncated grid-function header")
    magic, dim, n = _GF_HEADER.unpack_from(data)
    if magic != _GF_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}, expected {_GF_MAGIC!r}")
    domain = GridDomain(dim, n, side, max_points=max(max_points, n**dim))
    body = np.frombuffer(data, dtype="<f8", offset=_GF_HEADER.size)
    if body.size != 2 * domain.size:
        raise ValueError(f"{path}: expected {domain.size} complex values, found {body.size / 2}")
    pairs = body.reshape(-1, 2)
    values = pairs[:, 0] + 1j * pairs[:, 1]
    if not np.any(pairs[:, 1]):
        values = pairs[:, 0].copy()
    return GridFunction(domain, values)
