"""Tracking-type optimal control with a fractional elliptic state operator.

Minimize ``J(y, u) = 1/2 ||y - y_O||^2 + gamma/2 ||u||^2`` subject to
``beta^-1 A^alpha y = u``. Eliminating state and adjoint leaves the Lagrange
equation for the control

    (beta A^-alpha + (gamma/beta) A^alpha) u = y_O,

after which the state is recovered as ``y = beta A^-alpha u``. With finite
differences the mass matrix is the identity.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .discretization import (
    Coefficient1D,
    SturmLiouville1D,
    assemble_sturm_liouville,
    get_coefficient,
)
from .operator_algebra import FactoredOperator, SpectralFunction, apply, build_operator
from .pcg import PcgConfig, SolveReport, pcg_solve
from .preconditioner import (
    DEFAULT_RANK,
    DEFAULT_TOL,
    AnisotropyCoefficients,
    anisotropy_from_coefficients,
    build_aniso_laplace_preconditioner,
    build_direct_inverse_preconditioner,
)
from .tensor_formats import CanonicalTensor, read_canon, truncate

__all__ = [
    "DEFAULT_COEFFICIENTS",
    "ControlProblem",
    "ControlSolution",
    "make_design",
    "design_from_file",
    "build_modes",
    "build_forward_operator",
    "build_preconditioner",
    "solve_control",
    "solve_state",
    "dense_oracle_solve",
    "cost_functional",
    "kkt_residuals",
]

DEFAULT_COEFFICIENTS = {2: ("a1", "a2"), 3: ("a1", "a2", "a3")}
MODIFIED_COEFFICIENTS = {2: ("a1", "a2_modified"), 3: ("a1", "a2_modified", "a3")}
BOX = (0.25, 0.75)


def _indicator(x, lo, hi, closed=True):
    return ((x >= lo) & (x <= hi) if closed else (x > lo) & (x < hi)).astype(float)


def make_design(kind: str, shape: Sequence[int]) -> CanonicalTensor:
    """Box or H-shaped target ``y_O`` as a canonical tensor with 0/1 entries.

    ``box``: product of indicators of [0.25, 0.75] (rank 1).
    ``h``: two vertical bars plus a crossbar in the (x1, x2) plane (rank 2),
    extruded over x3 in [0.25, 0.75] in 3D.
    """
    shape = tuple(int(n) for n in shape)
    if len(shape) not in (2, 3):
        raise ValueError("designs are defined for d = 2 and d = 3")
    xs = [np.arange(1, n + 1) / (n + 1) for n in shape]
    if kind == "box":
        return CanonicalTensor.from_factors([_indicator(x, *BOX)[:, None] for x in xs])
    if kind not in ("h", "h_type"):
        raise ValueError(f"unknown design {kind!r}")
    x1, x2 = xs[0], xs[1]
    bars = np.maximum(_indicator(x1, 0.2, 0.35), _indicator(x1, 0.65, 0.8))
    gap = _indicator(x1, 0.35, 0.65, closed=False)
    f1 = np.stack([bars, gap], axis=1)
    f2 = np.stack([_indicator(x2, 0.2, 0.8), _indicator(x2, 0.425, 0.575)], axis=1)
    factors = [f1, f2]
    if len(shape) == 3:
        z = _indicator(xs[2], *BOX)
        factors.append(np.stack([z, z], axis=1))
    return CanonicalTensor.from_factors(factors)


def design_from_file(path, shape: Sequence[int]) -> CanonicalTensor:
    t = read_canon(path)
    if t.shape != tuple(shape):
        raise ValueError(f"{path}: design shape {t.shape} does not match grid {tuple(shape)}")
    return t


def _resolve_coefficients(coeffs, d: int) -> tuple[Coefficient1D, ...]:
    if coeffs in (None, "default"):
        coeffs = DEFAULT_COEFFICIENTS[d]
    elif coeffs == "modified":
        coeffs = MODIFIED_COEFFICIENTS[d]
    elif coeffs == "unit":
        coeffs = ("unit",) * d
    out = tuple(get_coefficient(c) if isinstance(c, str) else c for c in coeffs)
    if len(out) != d:
        raise ValueError(f"need {d} coefficients, got {len(out)}")
    return out


@dataclass
class ControlProblem:
    """Discrete control problem and solver settings.

    ``precond`` is ``"direct"`` (reciprocal function of ``A`` in its own
    eigenbasis) or ``"aniso"`` (reciprocal function of a constant-coefficient
    Laplacian in the sine basis). For ``"aniso"``, ``b0="unit"`` gives the
    plain Laplacian and ``b0="scaled"`` uses ``(max a + min a)/2`` per mode.
    ``op_eps`` is the compression tolerance of the forward operator, kept
    separate from the PCG truncation tolerance ``pcg.eps``.
    """

    n: tuple
    alpha: float
    beta: float = 1.0
    gamma: float = 1.0
    coeffs: tuple = ()
    design: CanonicalTensor | None = None
    precond: str | None = None
    b0: str = "unit"
    precond_rank: int = DEFAULT_RANK
    precond_tol: float = DEFAULT_TOL
    boundary: str = "paper"
    op_eps: float | None = None
    op_rank_cap: int = 200
    pcg: PcgConfig = field(default_factory=PcgConfig)

    def __post_init__(self):
        self.n = (int(self.n),) * 2 if np.isscalar(self.n) else tuple(int(v) for v in self.n)
        d = len(self.n)
        if d not in (2, 3):
            raise ValueError("dimension must be 2 or 3")
        if min(self.n) < 2:
            raise ValueError("need at least 2 interior points per mode")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if self.beta <= 0 or self.gamma <= 0:
            raise ValueError("beta and gamma must be positive")
        self.coeffs = _resolve_coefficients(self.coeffs or None, d)
        if self.design is None:
            self.design = make_design("box", self.n)
        if self.design.shape != self.n:
            raise ValueError(f"design shape {self.design.shape} does not match grid {self.n}")
        if self.precond is None:
            self.precond = "direct" if d == 2 else "aniso"
        if self.precond not in ("direct", "aniso"):
            raise ValueError(f"unknown preconditioner {self.precond!r}")
        if self.b0 not in ("unit", "scaled"):
            raise ValueError(f"unknown b0 choice {self.b0!r}")
        if self.op_eps is None:
            self.op_eps = 1e-10 if d == 2 else 1e-6

    @property
    def dim(self) -> int:
        return len(self.n)

    @property
    def size(self) -> int:
        return int(np.prod(self.n))


@dataclass
class ControlSolution:
    control: CanonicalTensor
    state: CanonicalTensor
    report: SolveReport
    anisotropy: AnisotropyCoefficients | None
    forward_rank: int
    precond_rank: int
    timings: dict


def build_modes(p: ControlProblem) -> list[SturmLiouville1D]:
    return [assemble_sturm_liouville(c, n, p.boundary).with_eigen() for c, n in zip(p.coeffs, p.n)]


def build_forward_operator(p: ControlProblem, modes=None) -> FactoredOperator:
    modes = modes or build_modes(p)
    f = SpectralFunction("lagrange", p.alpha, p.beta, p.gamma)
    return build_operator(modes, f, p.op_eps, rank_cap=p.op_rank_cap)


def build_preconditioner(p: ControlProblem, modes=None):
    """Returns ``(operator, anisotropy record or None)``."""
    modes = modes or build_modes(p)
    with warnings.catch_warnings():
        # a rank-limited preconditioner that misses its tolerance is expected
        warnings.simplefilter("ignore", RuntimeWarning)
        if p.precond == "direct":
            P = build_direct_inverse_preconditioner(modes, p.alpha, p.beta, p.gamma, p.precond_tol,
                                                    p.precond_rank)
            return P, None
        aniso = anisotropy_from_coefficients(modes, p.n)
        b0 = aniso if p.b0 == "scaled" else AnisotropyCoefficients.isotropic(p.dim)
        P = build_aniso_laplace_preconditioner(p.n, b0, p.alpha, p.beta, p.gamma, p.precond_tol,
                                               p.precond_rank)
        return P, aniso


def solve_control(p: ControlProblem, modes=None) -> ControlSolution:
    """Solve the Lagrange equation by low-rank PCG, then recover the state."""
    timings = {}
    t0 = time.perf_counter()
    modes = modes or build_modes(p)
    timings["eigen"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    F = build_forward_operator(p, modes)
    P, aniso = build_preconditioner(p, modes)
    timings["operators"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    report = pcg_solve(lambda x: apply(F, x), lambda x: apply(P, x), p.design, cfg=p.pcg)
    timings["pcg"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    y = solve_state(p, report.x, modes)
    timings["state"] = time.perf_counter() - t0
    return ControlSolution(report.x, y, report, aniso, F.rank, P.rank, timings)


def solve_state(p: ControlProblem, u: CanonicalTensor, modes=None) -> CanonicalTensor:
    """``y = beta A^-alpha u``, truncated at the PCG tolerance."""
    if u.shape != p.n:
        raise ValueError(f"control shape {u.shape} does not match grid {p.n}")
    modes = modes or build_modes(p)
    op = build_operator(modes, SpectralFunction("inverse_power", p.alpha), p.op_eps,
                        rank_cap=p.op_rank_cap).scaled(p.beta)
    y = apply(op, u)
    return truncate(y, p.pcg.eps) if p.pcg.eps > 0 else y


def _dense_function(modes, f) -> np.ndarray:
    G = modes[0].eigvecs
    lam = modes[0].eigvals
    for m in modes[1:]:
        G = np.kron(G, m.eigvecs)
        lam = np.add.outer(lam, m.eigvals).ravel()
    return (G * f(lam)) @ G.T


def dense_oracle_solve(p: ControlProblem, modes=None, max_size: int = 200_000):
    """Dense reference: ``u``, ``y`` and adjoint ``p`` as d-way arrays.

    Uses explicit ``N x N`` matrices, so the practical limit is set by memory
    (N of a few thousand); ``max_size`` is the hard guard.
    """
    if p.size > max_size:
        raise ValueError(f"N = {p.size} exceeds the dense oracle limit {max_size}")
    modes = modes or build_modes(p)
    a, b, g = p.alpha, p.beta, p.gamma
    F2 = _dense_function(modes, lambda lam: b * lam**-a + (g / b) * lam**a)
    rhs = p.design.full().ravel()
    u = scipy.linalg.solve(F2, rhs, assume_a="pos")
    y = b * (_dense_function(modes, lambda lam: lam**-a) @ u)
    adj = g * u / b  # from gamma u - beta p = 0
    return u.reshape(p.n), y.reshape(p.n), adj.reshape(p.n)


def cost_functional(y, u, design, gamma: float) -> float:
    """``1/2 ||y - y_O||^2 + gamma/2 ||u||^2`` on the grid (identity mass matrix)."""
    y, u = np.asarray(y, float), np.asarray(u, float)
    d = design.full() if isinstance(design, CanonicalTensor) else np.asarray(design, float)
    return 0.5 * float(np.sum((y - d) ** 2)) + 0.5 * gamma * float(np.sum(u**2))


def kkt_residuals(p: ControlProblem, y, u, adj, modes=None) -> tuple[float, float, float]:
    """Relative residuals of the first-order system with ``M = I``

        (I)   y + A^alpha p            = y_O
        (II)  gamma u - beta p         = 0
        (III) A^alpha y - beta u       = 0
    """
    modes = modes or build_modes(p)
    Aa = _dense_function(modes, lambda lam: lam**p.alpha)
    y, u, adj = (np.asarray(v, float).ravel() for v in (y, u, adj))
    yd = p.design.full().ravel()
    r1 = np.linalg.norm(y + Aa @ adj - yd) / np.linalg.norm(yd)
    r2 = np.linalg.norm(p.gamma * u - p.beta * adj) / max(np.linalg.norm(p.gamma * u), 1e-300)
    r3 = np.linalg.norm(Aa @ y - p.beta * u) / max(np.linalg.norm(p.beta * u), 1e-300)
    return float(r1), float(r2), float(r3)
