"""3D solve with the H-shaped design: plain versus coefficient-scaled Laplace preconditioner.

    python3 demos/precond_3d.py [n]
"""

import sys

from fraclop.control import ControlProblem, make_design, solve_control
from fraclop.pcg import PcgConfig

n = int(sys.argv[1]) if len(sys.argv) > 1 else 31
shape = (n, n, n)

for coeffs in ("default", "modified"):
    for b0 in ("unit", "scaled"):
        p = ControlProblem(shape, 1.0, coeffs=coeffs, design=make_design("h", shape), precond="aniso", b0=b0,
                           pcg=PcgConfig(stop_rule="integral"))
        sol = solve_control(p)
        print(f"coefficients={coeffs:<8} b0={b0:<6} q={sol.anisotropy.q:.3f} "
              f"iterations={sol.report.iterations:<3d} max rank={sol.report.max_rank}")
