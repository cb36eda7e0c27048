"""Singular values of the spectral coefficient matrix f(lam_i + mu_j) and the resulting relative eps-ranks.

    python3 demos/rank_decay.py [n]
"""

import sys

import numpy as np

from fraclop.discretization import assemble_sturm_liouville, get_coefficient
from fraclop.operator_algebra import SpectralFunction, build_coefficient_tensor
from fraclop.tensor_formats import eps_rank

n = int(sys.argv[1]) if len(sys.argv) > 1 else 255
modes = [assemble_sturm_liouville(get_coefficient(c), n).with_eigen() for c in ("a1", "a2")]
idx = np.indices((n, n)).reshape(2, -1)

print("alpha  " + "  ".join(f"rank@{e:.0e}" for e in (1e-4, 1e-6, 1e-8, 1e-10)) + "  s25/s1")
for alpha in (1.0, 0.5, 0.1):
    M = build_coefficient_tensor(modes, SpectralFunction("lagrange", alpha))(*idx).reshape(n, n)
    s = np.linalg.svd(M, compute_uv=False)
    ranks = [eps_rank(s, e * np.linalg.norm(s)) for e in (1e-4, 1e-6, 1e-8, 1e-10)]
    print(f"{alpha:<5g}  " + "  ".join(f"{r:>10d}" for r in ranks) + f"  {s[24] / s[0]:.1e}")
