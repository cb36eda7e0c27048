"""Low-rank preconditioners for ``beta A^-alpha + (gamma/beta) A^alpha``.

Two constructions share the reciprocal function
``f(lam) = 1 / (beta lam^-alpha + (gamma/beta) lam^alpha)``:

* ``aniso``: ``f`` on the spectrum of the constant-coefficient operator
  ``sum_l b0_l (-d^2/dx_l^2)``, diagonalized by the sine transform;
* ``direct``: ``f`` on the spectrum of ``A`` itself, in its eigenbases.

By default the coefficient tensor is a positive exponential sum
``sum_k w_k o_l exp(-t_k lam_l)``, so the preconditioner is symmetric positive
definite at any rank. ``method="tucker"`` uses the generic compression path
instead, capped at ``rank_cap`` terms; a capped Tucker/canonical
approximation of this function is not guaranteed to stay positive.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .discretization import SturmLiouville1D, laplace_eigenpairs, midpoints
from .operator_algebra import (
    SINE,
    CompressionError,
    FactoredOperator,
    SpectralFunction,
    build_coefficient_tensor,
    compress_coefficient_tensor,
    expsum_coefficient_tensor,
)

__all__ = [
    "AnisotropyCoefficients",
    "ConditionEstimate",
    "anisotropy_from_coefficients",
    "build_aniso_laplace_preconditioner",
    "build_direct_inverse_preconditioner",
    "estimate_condition",
    "analytic_bound",
]

DEFAULT_RANK = 12
DEFAULT_TOL = 1e-2


@dataclass(frozen=True)
class AnisotropyCoefficients:
    """Scaling constants ``b0_l = (max a_l + min a_l) / 2`` and the spread ``q``."""

    b0: tuple[float, ...]
    a_min: tuple[float, ...]
    a_max: tuple[float, ...]

    @property
    def q(self) -> float:
        return max((hi - b) / b for b, hi in zip(self.b0, self.a_max))

    @classmethod
    def isotropic(cls, d: int) -> "AnisotropyCoefficients":
        return cls((1.0,) * d, (1.0,) * d, (1.0,) * d)

    def as_dict(self) -> dict:
        out = {f"b0_{l + 1}": b for l, b in enumerate(self.b0)}
        out["q"] = self.q
        return out


def anisotropy_from_coefficients(coefs, n: int | Sequence[int]) -> AnisotropyCoefficients:
    """Min/max of each coefficient over the midpoints of its assembly grid.

    ``coefs`` holds callables or assembled :class:`SturmLiouville1D` modes
    (whose stored midpoint samples are then used directly).
    """
    ns = [n] * len(coefs) if np.isscalar(n) else list(n)
    lo, hi = [], []
    for c, m in zip(coefs, ns):
        a = c.coef_samples if isinstance(c, SturmLiouville1D) else np.asarray(c(midpoints(m)), float)
        lo.append(float(a.min()))
        hi.append(float(a.max()))
    if min(hi) <= 0:
        raise ValueError("coefficient is non-positive everywhere on a mode")
    b0 = tuple(0.5 * (a + b) for a, b in zip(lo, hi))
    return AnisotropyCoefficients(b0, tuple(lo), tuple(hi))


def analytic_bound(q: float, alpha: float) -> float | None:
    """Spectral-equivalence bound ``max{(1+q)^a, (1-q)^-a} / min{(1+q)^-a, (1-q)^a}``.

    Returns ``None`` (not applicable) when ``q >= 1``.
    """
    if q >= 1:
        return None
    up = max((1 + q) ** alpha, (1 - q) ** -alpha)
    down = min((1 + q) ** -alpha, (1 - q) ** alpha)
    return up / down


def _reciprocal_tensor(eigs, alpha, beta, gamma, eps, rank_cap, method):
    f = SpectralFunction("lagrange_inverse", alpha, beta, gamma)
    if method == "expsum":
        return expsum_coefficient_tensor(eigs, f, eps, rank_cap)
    if method != "tucker":
        raise ValueError(f"unknown preconditioner construction {method!r}")
    entry = build_coefficient_tensor(eigs, f)
    try:
        # eps / 2 as in build_operator, so that P F ~ I holds to a few eps
        return compress_coefficient_tensor(entry, entry.shape, eps / 2, rank_cap=rank_cap)
    except CompressionError as err:
        warnings.warn(f"preconditioner capped at rank {rank_cap} (error {err.achieved:.3g})",
                      RuntimeWarning, stacklevel=3)
        return err.tensor


def build_aniso_laplace_preconditioner(
    n: int | Sequence[int],
    coeffs: AnisotropyCoefficients,
    alpha: float,
    beta: float = 1.0,
    gamma: float = 1.0,
    eps: float = DEFAULT_TOL,
    rank_cap: int = DEFAULT_RANK,
    method: str = "expsum",
) -> FactoredOperator:
    """Reciprocal Lagrange function of ``sum_l b0_l (-Laplacian_l)`` in the sine basis."""
    d = len(coeffs.b0)
    ns = [n] * d if np.isscalar(n) else list(n)
    if min(coeffs.b0) <= 0:
        raise ValueError("scaling constants must be positive")
    eigs = [b * laplace_eigenpairs(m) for b, m in zip(coeffs.b0, ns)]
    coeff = _reciprocal_tensor(eigs, alpha, beta, gamma, eps, rank_cap, method)
    return FactoredOperator((SINE,) * d, coeff, "aniso")


def build_direct_inverse_preconditioner(
    modes: Sequence[SturmLiouville1D],
    alpha: float,
    beta: float = 1.0,
    gamma: float = 1.0,
    eps: float = DEFAULT_TOL,
    rank_cap: int = DEFAULT_RANK,
    method: str = "expsum",
) -> FactoredOperator:
    """Reciprocal Lagrange function of ``A`` itself, in the eigenbases of ``modes``."""
    modes = [m.with_eigen() for m in modes]
    coeff = _reciprocal_tensor([m.eigvals for m in modes], alpha, beta, gamma, eps, rank_cap, method)
    return FactoredOperator(tuple(m.eigvecs for m in modes), coeff, "direct")


@dataclass(frozen=True)
class ConditionEstimate:
    cond: float
    lam_min: float
    lam_max: float
    bound: float | None  # None when q >= 1 or q unknown

    def as_dict(self) -> dict:
        return {"cond": self.cond, "lam_min": self.lam_min, "lam_max": self.lam_max,
                "bound": "not applicable" if self.bound is None else self.bound}


def estimate_condition(precond, forward, q: float | None = None, alpha: float | None = None,
                       max_size: int = 10_000) -> ConditionEstimate:
    """Spectral condition number of ``L^T F L`` where ``P = L L^T``.

    ``precond`` and ``forward`` are factored operators or dense matrices.
    Raises ``numpy.linalg.LinAlgError`` if ``P`` or the product is not
    positive definite.
    """
    P = precond.dense() if isinstance(precond, FactoredOperator) else np.asarray(precond)
    F = forward.dense() if isinstance(forward, FactoredOperator) else np.asarray(forward)
    if P.shape[0] > max_size:
        raise ValueError(f"N = {P.shape[0]} too large for dense condition estimate")
    P = 0.5 * (P + P.T)
    try:
        L = scipy.linalg.cholesky(P, lower=True)
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError("preconditioner is not positive definite") from None
    S = L.T @ F @ L
    lam = scipy.linalg.eigvalsh(0.5 * (S + S.T))
    if lam[0] <= 0:
        raise np.linalg.LinAlgError(f"preconditioned operator is indefinite (lambda_min = {lam[0]:.3g})")
    bound = analytic_bound(q, alpha) if q is not None and alpha is not None else None
    return ConditionEstimate(float(lam[-1] / lam[0]), float(lam[0]), float(lam[-1]), bound)
