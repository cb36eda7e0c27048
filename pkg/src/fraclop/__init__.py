"""Low-rank solvers for optimal control problems with fractional elliptic operators.

Operators of the form ``F(A)`` for separable Sturm-Liouville operators ``A``
are represented as short sums of Kronecker products in the eigenbases of the
1D factors; vectors are canonical tensors, and the Lagrange equation for the
control is solved by rank-truncated preconditioned CG.
"""

from .control import ControlProblem, dense_oracle_solve, make_design, solve_control, solve_state
from .discretization import assemble_sturm_liouville, get_coefficient
from .operator_algebra import FactoredOperator, SpectralFunction, apply, build_operator
from .pcg import PcgConfig, SolveReport, pcg_solve
from .tensor_formats import CanonicalTensor, TuckerTensor, read_canon, truncate, write_canon

__version__ = "0.1.0"

__all__ = [
    "CanonicalTensor",
    "TuckerTensor",
    "ControlProblem",
    "FactoredOperator",
    "PcgConfig",
    "SolveReport",
    "SpectralFunction",
    "apply",
    "assemble_sturm_liouville",
    "build_operator",
    "dense_oracle_solve",
    "get_coefficient",
    "make_design",
    "pcg_solve",
    "read_canon",
    "solve_control",
    "solve_state",
    "truncate",
    "write_canon",
]
