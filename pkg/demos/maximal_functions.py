"""
Maximal functions and square functions of a molecule
====================================================

Synthesize a molecule from a tent atom, then compare the L1 sizes of the
radial, non-tangential and Hardy-Littlewood maximal functions with the
conical square function.
"""

import numpy as np

from heatframe.calculus import builtin_symbol
from heatframe.hardy import make_tent_atom, synthesize_molecule
from heatframe.grid import GridDomain
from heatframe.norms import (ConeParams, hl_maximal, lp_norm, nontangential_maximal, radial_maximal,
                             square_function_SL)
from heatframe.operators import build_operator

dom = GridDomain(1, 128)
op = build_operator("laplacian", dom)

atom = make_tent_atom(0.5, 1 / 8, dom)
m = synthesize_molecule(op, atom).values
print(f"molecule mean: {np.sum(m.values) * dom.cell_volume:.1e}")

cone = ConeParams(tuple(np.geomspace(2.3 * dom.spacing, 0.49, 24)))
fields = {
    "radial": radial_maximal(op, m, cone.t_grid),
    "non-tangential": nontangential_maximal(op, m, cone),
    "Hardy-Littlewood": hl_maximal(m.values, dom),
    "square function": square_function_SL(op, builtin_symbol("zeta_exp", 1), m, cone),
}
for name, g in fields.items():
    print(f"{name:>17}: L1 = {lp_norm(g, 1):.4f}")
