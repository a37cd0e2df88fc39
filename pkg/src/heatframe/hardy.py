"""Tent atoms, L-molecules and the H^1 / maximal-function checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .calculus import AnalyticSymbol
from .frame import build_frame
from .grid import GridDomain, GridFunction, as_values
from .norms import (ConeParams, g_function, gradient_nt_maximal, hl_maximal, lp_norm,
                    nontangential_maximal, radial_maximal)
from .operators import OperatorModel
from .quadrature import log_trapezoid_weights
from .testfuncs import DEFAULT_SEED, band_limited_family

ATOM_T_NODES = 17
_SUPPORT_EPS = 1e-12
# (center as a fraction of the side, radius as a fraction of the side)
STANDARD_ATOMS = ((0.5, 1 / 8), (0.3, 1 / 4), (0.62, 1 / 8), (0.05, 1 / 8), (0.8, 1 / 4))
G1_DELTAS = (1.05, 1.2, 1.5, 2.0)


def ball_measure(radius: float, dim: int) -> float:
    return 2 * radius if dim == 1 else math.pi * radius**2


def tent_normalization(ball: float, support_volume: float) -> float:
    """``c0`` making a constant block on ``support x [r/4, r/2]`` have
    ``int int |a|^2 dx dt/t = 1/|B|``."""
    return (ball * support_volume * math.log(2)) ** -0.5


@dataclass
class TentAtom:
    center: tuple
    radius: float
    domain: GridDomain = field(repr=False)
    t_nodes: np.ndarray = field(repr=False)
    c0: float
    support: np.ndarray = field(repr=False)

    @property
    def ball_measure(self) -> float:
        return ball_measure(self.radius, self.domain.dim)

    @property
    def values(self) -> np.ndarray:
        """``a(y, t_k)`` as a (points, t nodes) array."""
        return np.outer(self.c0 * self.support, np.ones(self.t_nodes.size))

    def normalization_integral(self) -> float:
        w = log_trapezoid_weights(self.t_nodes)
        return float(np.sum(self.values**2 @ w) * self.domain.cell_volume)

    def tent_excess(self) -> float:
        """``max (|y - c| + t) - r_B`` over the support; nonpositive for a valid atom."""
        d = self.domain.distances_from(self.center)[self.support]
        return float(d.max() + self.t_nodes.max() - self.radius)


def make_tent_atom(center, radius: float, domain: GridDomain, t_nodes: int = ATOM_T_NODES) -> TentAtom:
    """Constant block on ``|y - center| <= r/2``, ``t in [r/4, r/2]``.

    ``c0`` uses the grid measure of the spatial block, so the normalization
    holds exactly on the grid.
    """
    h = domain.spacing
    if not 8 * h * (1 - 1e-12) <= radius <= domain.side / 4 * (1 + 1e-12):
        raise ValueError(f"atom radius {radius} outside [8h, side/4] = [{8 * h}, {domain.side / 4}]")
    center = tuple(np.broadcast_to(np.asarray(center, dtype=float), (domain.dim,)) % domain.side)
    support = domain.distances_from(center) <= radius / 2 * (1 + _SUPPORT_EPS)
    vol = support.sum() * domain.cell_volume
    c0 = tent_normalization(ball_measure(radius, domain.dim), vol)
    return TentAtom(center, float(radius), domain, np.geomspace(radius / 4, radius / 2, t_nodes), c0, support)


@dataclass
class Molecule:
    values: GridFunction
    source: TentAtom | None = None

    def scaled(self, c: float) -> "Molecule":
        return Molecule(self.values * c, self.source)


def synthesize_molecule(op: OperatorModel, atom: TentAtom) -> Molecule:
    """``m = int t^2 L e^{-t^2 L} a(., t) dt/t`` on the atom's time nodes."""
    sp = op.spectral
    a_hat = sp.eigenvectors.T @ atom.values
    t2 = atom.t_nodes**2
    mult = np.outer(sp.eigenvalues, t2) * np.exp(-np.outer(sp.eigenvalues, t2))
    m = sp.eigenvectors @ ((mult * a_hat) @ log_trapezoid_weights(atom.t_nodes))
    return Molecule(GridFunction(op.domain, m), atom)


@dataclass
class G1Scan:
    norms: dict
    M: int

    @property
    def ratio(self) -> float:
        vals = np.array(list(self.norms.values()))
        if np.all(vals == 0):
            return 1.0
        return float(vals.max() / vals.min())

    def as_dict(self) -> dict:
        return {"norms": {str(k): v for k, v in self.norms.items()}, "M": self.M, "ratio": self.ratio}


def molecule_g1_scan(op: OperatorModel, sym: AnalyticSymbol, molecule, deltas=G1_DELTAS, M: int = 1) -> G1Scan:
    """``|g_{1,delta}(m)|_1`` for each delta; the net is rebuilt per delta."""
    f = molecule.values if isinstance(molecule, Molecule) else molecule
    norms = {}
    for delta in deltas:
        if not 1 < delta <= 2:
            raise ValueError(f"delta must lie in (1, 2], got {delta}")
        ctx = build_frame(op, sym, delta, M)
        norms[delta] = lp_norm(g_function(1, ctx, f), 1)
    return G1Scan(norms, M)


@dataclass
class GoodLambdaResult:
    holds: bool
    s: float
    r: float
    left_count: int
    right_count: int
    violations: list

    def as_dict(self) -> dict:
        return {"holds": self.holds, "s": self.s, "r": self.r, "left_count": self.left_count,
                "right_count": self.right_count, "violations": self.violations}


@dataclass
class MaximalFields:
    """The three maximal functions of one input on a shared time sampling."""

    radial: GridFunction
    nontangential: GridFunction
    gradient: GridFunction


def maximal_fields(op: OperatorModel, f, cone: ConeParams | None = None) -> MaximalFields:
    cone = cone or ConeParams.default(op.domain)
    return MaximalFields(radial_maximal(op, f, cone.times),
                         nontangential_maximal(op, f, cone.with_aperture(1.0)),
                         gradient_nt_maximal(op, f, cone.with_aperture(2.0)))


def good_lambda_check(op: OperatorModel, f, s: float, r: float, cone: ConeParams | None = None,
                      fields: MaximalFields | None = None) -> GoodLambdaResult:
    """Checks ``{N f > s} & {grad-max <= s/r}`` lies inside ``{M chi_{f+ > s/2} > r^n / 4^n}``."""
    if s <= 0 or not 0 < r <= 1:
        raise ValueError("need s > 0 and r in (0, 1]")
    dom = op.domain
    fields = fields or maximal_fields(op, f, cone)
    left = (fields.nontangential.values > s) & (fields.gradient.values <= s / r)
    chi = (fields.radial.values > s / 2).astype(float)
    right = hl_maximal(chi, dom).values > (r / 4) ** dom.dim
    bad = np.nonzero(left & ~right)[0]
    return GoodLambdaResult(bool(bad.size == 0), float(s), float(r), int(left.sum()), int(right.sum()),
                            [tuple(float(v) for v in dom.coords[i]) for i in bad])


def maximal_equivalence_report(op: OperatorModel, suite, cone: ConeParams | None = None, ctx=None) -> dict:
    """L^1 norms of the radial, nontangential and gradient maximal functions.

    ``suite`` is a list of ``(name, function)``. When a frame context is
    given, ``|g_1 f|_1`` is reported as an H^1 proxy next to the gradient norm.
    """
    records = []
    for name, f in suite:
        mf = maximal_fields(op, f, cone)
        rad, nt, grad = (lp_norm(g, 1) for g in (mf.radial, mf.nontangential, mf.gradient))
        rec = {"name": name, "radial_L1": rad, "nontangential_L1": nt, "gradient_L1": grad,
               "nt_over_radial": nt / rad if rad > 0 else math.inf,
               "gradient_over_radial": grad / rad if rad > 0 else math.inf,
               "pointwise_order": bool(np.all(mf.radial.values <= mf.nontangential.values * (1 + 1e-12)))}
        if ctx is not None:
            g1 = lp_norm(g_function(1, ctx, f), 1)
            rec["g1_L1"] = g1
            rec["gradient_over_g1"] = grad / g1 if g1 > 0 else math.inf
        records.append(rec)
    return {"records": records, "max_ratio": max(r["nt_over_radial"] for r in records)}


def standard_molecules(op: OperatorModel, atoms=STANDARD_ATOMS) -> list[tuple[str, Molecule]]:
    dom = op.domain
    out = []
    for k, (c, r) in enumerate(atoms):
        center = tuple(((c + 0.31 * a) % 1.0) * dom.side for a in range(dom.dim))
        atom = make_tent_atom(center, r * dom.side, dom)
        out.append((f"molecule{k}", synthesize_molecule(op, atom)))
    return out


def standard_suite(op: OperatorModel, seed: int = DEFAULT_SEED, band_count: int = 5,
                   max_mode: int = 8) -> list[tuple[str, GridFunction]]:
    """Five molecules and ``band_count`` seeded band-limited functions.

    ``max_mode`` is fixed so the same continuum functions appear at every
    resolution.
    """
    suite = [(name, m.values) for name, m in standard_molecules(op)]
    fams = band_limited_family(op.domain, band_count, seed, min(max_mode, op.domain.n // 2 - 1))
    suite += [(f"band{k}", f) for k, f in enumerate(fams)]
    return suite


def percentile_levels(values, percentiles=(50, 90)) -> list[float]:
    vals = np.abs(as_values(values))
    return [float(np.percentile(vals, p)) for p in percentiles]
