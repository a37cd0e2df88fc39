"""Brute-force reference implementations.

Nothing here imports the package: operators act through the FFT (the
periodic laplacian is circulant), nets and cones are rebuilt with plain
loops, and Calderon constants come from the Gamma function.
"""

import math

import numpy as np


def laplacian_loops(n, side=1.0):
    h = side / n
    L = np.zeros((n, n))
    for i in range(n):
        L[i, i] = 2 / h**2
        L[i, (i - 1) % n] -= 1 / h**2
        L[i, (i + 1) % n] -= 1 / h**2
    return L


def laplacian_symbol(n, side=1.0):
    """Eigenvalues of the periodic 3-point laplacian, in FFT order."""
    h = side / n
    k = np.arange(n)
    return (2 - 2 * np.cos(2 * np.pi * k / n)) / h**2


def fft_apply(multiplier, f):
    """``m(L) f`` for the 1D periodic laplacian; ``multiplier`` acts on eigenvalues."""
    lam = laplacian_symbol(len(f))
    return np.real(np.fft.ifft(multiplier(lam) * np.fft.fft(f)))


def calderon_gamma(k):
    """``1/2 int (t^{2k+2} e^{-t})^2 dt/t``."""
    return 0.5 * math.gamma(4 * k + 4) / 2 ** (4 * k + 4)


def q_exp(k, normalize=True):
    c = calderon_gamma(k) if normalize else 1.0
    return lambda z: z ** (2 * k + 2) * np.exp(-z) / math.sqrt(c)


def torus_dist(x, y, side=1.0):
    d = abs(x - y) % side
    return min(d, side - d)


def log_trap(nodes):
    u = [math.log(t) for t in nodes]
    w = [0.0] * len(u)
    for i in range(len(u) - 1):
        w[i] += 0.5 * (u[i + 1] - u[i])
        w[i + 1] += 0.5 * (u[i + 1] - u[i])
    return w


def square_function_loops(f, t_nodes, qfunc, side=1.0):
    n = len(f)
    h = side / n
    x = [i * h for i in range(n)]
    w = log_trap(t_nodes)
    evolved = [fft_apply(lambda lam, t=t: qfunc(t * t * lam), f) for t in t_nodes]
    out = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for k, t in enumerate(t_nodes):
            inner = 0.0
            for m in range(n):
                if torus_dist(x[i], x[m], side) < t:
                    inner += abs(evolved[k][m]) ** 2 * h
            acc += w[k] * inner / t
        out[i] = math.sqrt(acc)
    return out


def cube_layout(n, side_len, side=1.0):
    """Cube index of every grid point and the sampling index of each cube
    for one scale with cube side ``side_len`` (1D, half-open, origin anchored)."""
    h = side / n
    count = max(1, math.ceil(side / side_len - 1e-9))
    member = [min(int(math.floor(i * h / side_len + 1e-9)), count - 1) for i in range(n)]
    if count > 1 and member.count(count - 1) == 0:
        count -= 1
    member = [min(m, count - 1) for m in member]
    centers = []
    for c in range(count):
        lo = c * side_len
        hi = side if c == count - 1 else min((c + 1) * side_len, side)
        mid = 0.5 * (lo + hi)
        pts = [i for i in range(n) if member[i] == c]
        best = min(pts, key=lambda i: (torus_dist(i * h, mid, side), i))
        centers.append(best)
    return member, centers


def g2_loops(f, delta, M, j_min, j_max, qfunc, band_nodes=9, side=1.0):
    n = len(f)
    h = side / n
    G2 = np.zeros(n)
    for j in range(j_min, j_max + 1):
        s = max(delta ** (-j - M), h)
        member, centers = cube_layout(n, s, side)
        ts = np.geomspace(delta ** (-j), delta ** (-j + 1), band_nodes)
        w = log_trap(ts)
        vals = [fft_apply(lambda lam, t=t: qfunc(t * t * lam), f) for t in ts]
        band = [sum(w[k] * vals[k][centers[c]] ** 2 for k in range(len(ts))) for c in range(len(centers))]
        for i in range(n):
            G2[i] += band[member[i]]
    return np.sqrt(G2)


def heat_fft(f, t):
    return fft_apply(lambda lam: np.exp(-t * t * lam), f)


def nontangential_loops(f, t_nodes, aperture=1.0, side=1.0):
    n = len(f)
    h = side / n
    evolved = [np.abs(heat_fft(f, t)) for t in t_nodes]
    out = np.zeros(n)
    for i in range(n):
        best = 0.0
        for k, t in enumerate(t_nodes):
            for m in range(n):
                if torus_dist(i * h, m * h, side) < aperture * t:
                    best = max(best, evolved[k][m])
        out[i] = best
    return out


def gradient_nt_loops(f, t_nodes, aperture=2.0, side=1.0):
    n = len(f)
    h = side / n
    grads = []
    for t in t_nodes:
        u = heat_fft(f, t)
        grads.append([t * abs(u[(m + 1) % n] - u[(m - 1) % n]) / (2 * h) for m in range(n)])
    out = np.zeros(n)
    for i in range(n):
        best = 0.0
        for k, t in enumerate(t_nodes):
            for m in range(n):
                if torus_dist(i * h, m * h, side) < aperture * t:
                    best = max(best, grads[k][m])
        out[i] = best
    return out


def indicator_maximal(x, a, b):
    """Centred maximal function on the line of the indicator of ``[a, b]``."""
    if a <= x <= b:
        return 1.0
    ell = b - a
    d = a - x if x < a else x - b
    return ell / (2 * (d + ell))


def wrapped_gaussian(d, t, images=4, side=1.0):
    """1D periodic heat kernel ``sum_m (4 pi t)^{-1/2} exp(-(d + m side)^2 / 4t)``."""
    m = np.arange(-images, images + 1)
    return np.sum(np.exp(-((np.asarray(d)[..., None] + m * side) ** 2) / (4 * t)), axis=-1) / math.sqrt(4 * math.pi * t)
