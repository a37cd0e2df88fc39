"""
How the remainder norm depends on delta and M
=============================================

Tabulate the operator norm of R = P - T on a 128-point grid.  At a fixed
number of sub-scales, cubes shrink relative to the kernel width only as
delta^-M, so pushing delta toward 1 alone does not help; adding sub-scales does.
"""

from heatframe.calculus import builtin_symbol
from heatframe.frame import build_frame, estimate_R_norm
from heatframe.grid import GridDomain
from heatframe.operators import build_operator

op = build_operator("laplacian", GridDomain(1, 128))
zeta = builtin_symbol("zeta_exp", 1)

deltas = (1.5, 1.2, 1.1, 1.05)
print("M  " + "  ".join(f"d={d:<5}" for d in deltas))
for M in (1, 2, 4):
    row = [estimate_R_norm(build_frame(op, zeta, d, M)) for d in deltas]
    print(f"{M}  " + "  ".join(f"{r:.4f} " for r in row))
