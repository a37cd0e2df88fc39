"""Acceptance gate: twelve end-to-end criteria at their stated tolerances.

Each criterion prints one ``PASS``/``FAIL`` line with its measured numbers.
Run ``pytest tests/test_acceptance.py -v`` or ``python3 tests/test_acceptance.py``.
"""

import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest
import scipy.linalg

sys.path.insert(0, str(Path(__file__).parent))

from heatframe import calculus as calc  # noqa: E402
from heatframe import frame as fr  # noqa: E402
from heatframe import hardy as hd  # noqa: E402
from heatframe import norms as nm  # noqa: E402
from heatframe.grid import GridDomain, GridFunction  # noqa: E402
from heatframe.operators import (build_operator, heat_kernel_matrix, heat_semigroup_apply,  # noqa: E402
                                 verify_gaussian_bound)
from heatframe.testfuncs import band_limited_family  # noqa: E402
from oracles import (calderon_gamma, g2_loops, gradient_nt_loops, nontangential_loops, q_exp,  # noqa: E402
                     square_function_loops, wrapped_gaussian)

BUDGET_SECONDS = 60.0
_cache: dict = {}


def _lap(n):
    if ("lap", n) not in _cache:
        _cache["lap", n] = build_operator("laplacian", GridDomain(1, n))
    return _cache["lap", n]


def _zeta():
    return calc.builtin_symbol("zeta_exp", 1)


def _tuned():
    if "tuned" not in _cache:
        op = _lap(128)
        res = fr.search_params(op, _zeta())
        ctx = fr.build_frame(op, _zeta(), res.delta, res.M)
        ctx.R_norm_estimate = res.achieved_norm
        _cache["tuned"] = (res, ctx)
    return _cache["tuned"]


def c01_calderon():
    errs = {k: abs(calc.calderon_constant(calc.builtin_symbol("zeta_exp", k)) - calderon_gamma(k)) / calderon_gamma(k)
            for k in (1, 2)}
    return max(errs.values()) <= 1e-8, f"rel err k=1 {errs[1]:.1e}, k=2 {errs[2]:.1e} (tol 1e-8)"


def c02_semigroup():
    op = _lap(128)
    one = GridFunction.constant(op.domain)
    f = band_limited_family(op.domain, 1)[0]
    cons = law = expm = 0.0
    for t in (1e-3, 1e-2, 1e-1):
        cons = max(cons, np.max(np.abs(heat_semigroup_apply(op, t, one).values - 1)))
        a = heat_semigroup_apply(op, t, heat_semigroup_apply(op, t, f)).values
        law = max(law, np.max(np.abs(a - heat_semigroup_apply(op, 2 * t, f).values)))
        E = scipy.linalg.expm(-t * op.matrix) / op.domain.cell_volume
        expm = max(expm, np.max(np.abs(E - heat_kernel_matrix(op, t).values)) / np.max(np.abs(E)))
    ok = cons <= 1e-10 and law <= 1e-9 and expm <= 1e-10
    return ok, f"conservation {cons:.1e}, semigroup law {law:.1e}, expm {expm:.1e}"


def c03_path_agreement():
    op = _lap(64)
    psi = calc.power_heat_symbol(2)
    f = band_limited_family(op.domain, 1, seed=3)[0]
    errs = []
    for t in (1e-3, 1e-2, 1e-1):
        a = calc.apply_calculus(op, psi, t, f)
        b = calc.apply_calculus(op, psi, t, f, calc.ContourQuadrature(nodes=200))
        errs.append((a - b).norm(2) / a.norm(2))
    return max(errs) <= 1e-6, "rel L2 " + ", ".join(f"{e:.1e}" for e in errs) + " (tol 1e-6)"


def c04_gaussian():
    op = _lap(128)
    dom = op.domain
    rep = verify_gaussian_bound(op, [1e-3, 1e-2])
    c = rep.extra["c"]
    d = dom.distance_matrix[0]
    ratios = []
    for rec in rep.records:
        g = wrapped_gaussian(dom.wrap(dom.axis), rec.t)
        mask = np.exp(-d**2 / (4 * rec.t)) >= 1e-8
        ref = np.max(g[mask] / (rec.t ** -0.5 * np.exp(-d[mask] ** 2 / (c * rec.t))))
        ratios.append(rec.fitted_C / ref)
    sch = build_operator("schrodinger", dom, potential=1.0 + 0.5 * np.cos(2 * np.pi * dom.axis))
    dom_ratio = verify_gaussian_bound(sch, [1e-3, 1e-2]).fitted_C / rep.fitted_C
    ok = all(0.5 <= r <= 2 for r in ratios) and dom_ratio <= 1.05
    return ok, f"fitted/wrapped {', '.join(f'{r:.3f}' for r in ratios)}; schrodinger/laplacian {dom_ratio:.3f}"


def c05_almost_orthogonality():
    op = _lap(128)
    slopes, Cs = [], []
    for t in (0.02, 0.05):
        slope, reps = calc.almost_orthogonality_slope(op, _zeta(), t, (1 / 2, 1 / 4, 1 / 8, 1 / 16))
        slopes.append(slope)
        Cs.append(max(r.fitted_C for r in reps))
    stab = max(Cs) / min(Cs)
    ok = all(0.8 <= s <= 1.2 for s in slopes) and stab <= 2
    return ok, f"slopes {', '.join(f'{s:.3f}' for s in slopes)} (want [0.8, 1.2]); C stability {stab:.2f}"


def c06_reconstruction():
    res, ctx = _tuned()
    rho = ctx.R_norm_estimate
    trunc = fr.truncation_residual(ctx)
    worst_err, worst_iter, bound_ok = 0.0, 0, True
    for f in band_limited_family(ctx.domain, 5, seed=2):
        coeffs = fr.analyze(ctx, f)
        inv = coeffs.inversion
        err = (fr.synthesize(ctx, coeffs) - f).norm(2) / f.norm(2)
        worst_err, worst_iter = max(worst_err, err), max(worst_iter, inv.iterations)
        bound_ok &= err <= 2 * (rho ** (inv.iterations + 1) / (1 - rho) + trunc)
    ok = res.achieved and rho <= 0.5 and worst_err <= 1e-6 and worst_iter <= 40 and bound_ok
    return ok, (f"delta={res.delta} M={res.M} |R|={rho:.4f}; rel err {worst_err:.1e} "
                f"in <= {worst_iter} iterations; bound respected: {bool(bound_ok)}")


def c07_algebra():
    _, ctx = _tuned()
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(50):
        f = rng.standard_normal(ctx.op.size)
        diff = fr.synthesize(ctx, fr.raw_coefficients(ctx, f)).values - ctx.T @ f
        worst = max(worst, np.linalg.norm(diff) / np.linalg.norm(f))
    return worst <= 1e-10, f"max rel error over 50 f {worst:.1e} (tol 1e-10)"


def c08_norm_equivalence():
    _, ctx = _tuned()
    fs = band_limited_family(ctx.domain, 20, seed=8)
    coeffs = [fr.analyze(ctx, f) for f in fs]
    spreads = {}
    for p in (1.5, 2.0, 3.0):
        r = [nm.coefficient_norm(c, ctx.net, p) / nm.lp_norm(f, p) for c, f in zip(coeffs, fs)]
        spreads[p] = (min(r), max(r))
    l2 = max(abs(nm.coefficient_norm(c, ctx.net, 2) - c.l2_norm()) / c.l2_norm() for c in coeffs)
    ok = all(hi / lo <= 10 for lo, hi in spreads.values()) and l2 <= 1e-12
    desc = "; ".join(f"p={p}: [{lo:.3f}, {hi:.3f}]" for p, (lo, hi) in spreads.items())
    return ok, f"{desc}; l2 identity {l2:.1e}"


def c09_g1_uniformity():
    op = _lap(128)
    ratios = []
    for _, m in hd.standard_molecules(op):
        scan = hd.molecule_g1_scan(op, _zeta(), m, (1.05, 1.2, 1.5, 2.0))
        assert all(np.isfinite(v) for v in scan.norms.values())
        ratios.append(scan.ratio)
    return max(ratios) <= 5, "max/min over delta per molecule " + ", ".join(f"{r:.2f}" for r in ratios)


def c10_molecules():
    op = _lap(128)
    means, scaled = [], []
    for r in (1 / 16, 1 / 8, 1 / 4):
        atom = hd.make_tent_atom(0.4, r, op.domain)
        m = hd.synthesize_molecule(op, atom).values
        means.append(abs(np.sum(m.values) * op.domain.cell_volume) / m.norm(1))
        scaled.append(m.norm(2) * math.sqrt(atom.ball_measure))
    stab = max(scaled) / min(scaled)
    ok = max(means) <= 1e-9 and stab <= 3
    return ok, f"max |mean|/L1 {max(means):.1e}; |m|_2 |B|^1/2 stability {stab:.3f}"


def c11_maximal():
    ratios, order_ok, gl_ok = {}, True, True
    for n in (64, 128):
        op = _lap(n)
        rep = hd.maximal_equivalence_report(op, hd.standard_suite(op))
        ratios[n] = rep["max_ratio"]
        order_ok &= all(r["pointwise_order"] and r["radial_L1"] <= r["nontangential_L1"] for r in rep["records"])
    op = _lap(128)
    violations = 0
    for _, f in hd.standard_suite(op):
        fields = hd.maximal_fields(op, f)
        for s in hd.percentile_levels(fields.nontangential):
            for r in (0.25, 0.5, 1.0):
                res = hd.good_lambda_check(op, f, s, r, fields=fields)
                violations += len(res.violations)
                gl_ok &= res.holds
    refine = max(ratios.values()) / min(ratios.values())
    ok = order_ok and refine <= 2 and gl_ok
    return ok, (f"N_h/f+ max ratio N=64 {ratios[64]:.3f}, N=128 {ratios[128]:.3f} (factor {refine:.3f}); "
                f"good-lambda violations {violations}")


def c12_oracles():
    op = _lap(64)
    dom = op.domain
    zeta = _zeta()
    f = band_limited_family(dom, 1, seed=12)[0].values
    cone = nm.ConeParams(tuple(np.geomspace(2.3 * dom.spacing, 0.49, 24)))

    def rel(a, b):
        return float(np.max(np.abs(a - b)) / np.max(np.abs(b)))

    errs = {"S_L": rel(nm.square_function_SL(op, zeta, f, cone).values,
                       square_function_loops(f, cone.t_grid, q_exp(1, normalize=False)))}
    ctx = fr.build_frame(op, zeta, 1.2, 4)
    p = ctx.params
    errs["g2"] = rel(nm.g_function(2, ctx, f).values, g2_loops(f, p.delta, p.M, p.j_min, p.j_max, q_exp(1)))
    errs["N_h"] = rel(nm.nontangential_maximal(op, f, cone).values, nontangential_loops(f, cone.t_grid))
    errs["grad"] = rel(nm.gradient_nt_maximal(op, f, cone.with_aperture(2.0)).values,
                       gradient_nt_loops(f, cone.t_grid))
    return max(errs.values()) <= 1e-8, ", ".join(f"{k} {v:.1e}" for k, v in errs.items()) + " (tol 1e-8)"


CRITERIA = [c01_calderon, c02_semigroup, c03_path_agreement, c04_gaussian, c05_almost_orthogonality,
            c06_reconstruction, c07_algebra, c08_norm_equivalence, c09_g1_uniformity, c10_molecules,
            c11_maximal, c12_oracles]


def evaluate(check):
    t0 = time.perf_counter()
    ok, detail = check()
    secs = time.perf_counter() - t0
    ok = bool(ok) and secs <= BUDGET_SECONDS
    line = f"{'PASS' if ok else 'FAIL'}  {check.__name__[:3].lstrip('c')}  {check.__name__[4:]}: {detail} [{secs:.1f}s]"
    return ok, line


@pytest.mark.parametrize("check", CRITERIA, ids=lambda c: c.__name__)
def test_criterion(check, capsys):
    ok, line = evaluate(check)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [evaluate(c) for c in CRITERIA]
    for _, line in results:
        print(line)
    print(f"{sum(ok for ok, _ in results)}/{len(results)} criteria pass")
    sys.exit(0 if all(ok for ok, _ in results) else 1)
