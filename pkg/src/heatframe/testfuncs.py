"""Seeded random test functions."""

from __future__ import annotations

import itertools

import numpy as np

from .grid import GridDomain, GridFunction

DEFAULT_SEED = 42


def _modes(dim: int, max_mode: int) -> np.ndarray:
    """Wave vectors with ``1 <= max|k_i| <= max_mode``, one of each ``+-k`` pair."""
    ks = []
    for k in itertools.product(range(-max_mode, max_mode + 1), repeat=dim):
        if any(k) and k > tuple(-v for v in k):
            ks.append(k)
    return np.array(ks, dtype=float)


def band_limited(domain: GridDomain, rng: np.random.Generator, max_mode: int | None = None) -> GridFunction:
    """Real trigonometric polynomial with random Gaussian coefficients on the
    low modes (default ``N // 8`` per axis), unit L^2 norm on the grid.

    The mean mode is left out. With a fixed ``max_mode`` and seed the same
    continuum function is sampled at every resolution.
    """
    K = domain.n // 8 if max_mode is None else int(max_mode)
    if not 1 <= K <= domain.n // 2 - 1:
        raise ValueError(f"max_mode {K} out of range for N={domain.n}")
    ks = _modes(domain.dim, K)
    coef = rng.standard_normal(len(ks)) + 1j * rng.standard_normal(len(ks))
    phase = 2 * np.pi * domain.coords @ ks.T / domain.side
    vals = np.real(np.exp(1j * phase) @ coef)
    f = GridFunction(domain, vals)
    return f * (1.0 / f.norm(2))


def band_limited_family(domain: GridDomain, count: int, seed: int = DEFAULT_SEED,
                        max_mode: int | None = None) -> list[GridFunction]:
    rng = np.random.default_rng(seed)
    return [band_limited(domain, rng, max_mode) for _ in range(count)]
