"""Log-uniform trapezoid rules for integrals against dt/t.

Every time integral in the package goes through these helpers so that
norms computed by different routes share one quadrature.
"""

import numpy as np


def log_nodes(t_lo: float, t_hi: float, n: int) -> np.ndarray:
    if not (0 < t_lo < t_hi):
        raise ValueError(f"need 0 < t_lo < t_hi, got [{t_lo}, {t_hi}]")
    if n < 2:
        raise ValueError("need at least two nodes")
    return np.geomspace(t_lo, t_hi, n)


def log_trapezoid_weights(nodes: np.ndarray) -> np.ndarray:
    """Weights ``w`` with ``sum(w * g(nodes)) ~ int g(t) dt/t`` for increasing nodes.

    The rule is the trapezoid rule in ``u = log t``, so it is exact for
    constants and spectrally accurate for smooth integrands that decay at
    both ends of the range.
    """
    u = np.log(np.asarray(nodes, dtype=float))
    if u.size == 1:
        return np.zeros(1)
    du = np.diff(u)
    if np.any(du <= 0):
        raise ValueError("nodes must be strictly increasing")
    w = np.zeros_like(u)
    w[:-1] += 0.5 * du
    w[1:] += 0.5 * du
    return w


def integrate_dt_over_t(func, t_lo: float, t_hi: float, n: int) -> float:
    """``int_{t_lo}^{t_hi} func(t) dt/t`` with ``n`` log-spaced trapezoid nodes."""
    t = log_nodes(t_lo, t_hi, n)
    return float(np.sum(log_trapezoid_weights(t) * func(t)))
