"""Solve a 2D fractional control problem in low-rank format and check it against a dense solve.

    python3 demos/solve_2d.py [n]
"""

import sys

import numpy as np

from fraclop.control import ControlProblem, build_modes, dense_oracle_solve, solve_control

n = int(sys.argv[1]) if len(sys.argv) > 1 else 63

for alpha in (1.0, 0.5, 0.1):
    p = ControlProblem((n, n), alpha)
    modes = build_modes(p)
    sol = solve_control(p, modes)
    u, y, _ = dense_oracle_solve(p, modes)
    err_u = np.abs(sol.control.full() - u).max()
    err_y = np.abs(sol.state.full() - y).max()
    print(f"alpha={alpha:<4g} iterations={sol.report.iterations} control rank={sol.control.rank:<3d} "
          f"max|u - u_dense|={err_u:.1e} max|y - y_dense|={err_y:.1e}")
