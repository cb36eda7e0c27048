"""Preconditioned conjugate gradients on canonical tensors with rank truncation.

Every iterate (S, X, R, Z, P) is re-compressed after the rank-increasing
update; each of these five truncations can be switched off individually.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .tensor_formats import CanonicalTensor, canonical_inner, canonical_norm, truncate

__all__ = ["residual_integral", "PcgConfig", "IterationRecord", "SolveReport", "PcgBreakdown", "pcg_solve", "write_history"]

TRUNCATION_POINTS = ("S", "X", "R", "Z", "P")
# relative: ||R|| / ||B|| <= tol
# integral: |h^d sum(R)| <= tol, the grid integral of the residual
STOP_RULES = ("relative", "integral")
HISTORY_COLUMNS = ["iter", "abs_residual", "rel_residual", "rank_X", "rank_R", "rank_Z", "rank_P", "rank_S",
                   "seconds"]


class PcgBreakdown(RuntimeError):
    """Loss of positive definiteness or a non-finite value during the iteration."""

    def __init__(self, message, iteration: int):
        super().__init__(f"iteration {iteration}: {message}")
        self.iteration = iteration


@dataclass
class PcgConfig:
    eps: float = 1e-6
    stop_tol: float = 1e-5
    max_iter: int = 50
    rank_cap: int = 120
    tucker_cap: int = 60
    truncate_at: frozenset = frozenset(TRUNCATION_POINTS)
    deterministic: bool = True
    stop_rule: str = "relative"

    def __post_init__(self):
        if self.stop_rule not in STOP_RULES:
            raise ValueError(f"unknown stopping rule {self.stop_rule!r}; choose from {STOP_RULES}")
        if self.eps < 0 or self.stop_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.rank_cap < 1 or self.tucker_cap < 1:
            raise ValueError("rank caps must be at least 1")
        self.truncate_at = frozenset(self.truncate_at)
        unknown = self.truncate_at - set(TRUNCATION_POINTS)
        if unknown:
            raise ValueError(f"unknown truncation points {sorted(unknown)}")


@dataclass
class IterationRecord:
    iter: int
    abs_residual: float
    rel_residual: float
    rank_X: int
    rank_R: int
    rank_Z: int
    rank_P: int
    rank_S: int
    seconds: float


@dataclass
class SolveReport:
    x: CanonicalTensor
    iterations: int
    history: list = field(default_factory=list)
    converged: bool = False
    reason: str = ""
    rank_cap_hit: bool = False
    notes: list = field(default_factory=list)

    @property
    def rel_residual(self) -> float:
        return self.history[-1].rel_residual if self.history else 0.0

    @property
    def max_rank(self) -> int:
        ranks = [max(r.rank_X, r.rank_R, r.rank_Z, r.rank_P, r.rank_S) for r in self.history]
        return max(ranks, default=self.x.rank)

    @property
    def seconds(self) -> float:
        return sum(r.seconds for r in self.history)


def residual_integral(R: CanonicalTensor) -> float:
    """Grid integral ``h^d sum_i R_i`` with ``h = 1/(n+1)`` per mode."""
    if R.rank == 0:
        return 0.0
    terms = R.weights.copy()
    for U in R.factors:
        terms *= U.sum(axis=0) / (U.shape[0] + 1)
    return float(terms.sum())


def write_history(path, report: SolveReport) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HISTORY_COLUMNS)
        for r in report.history:
            w.writerow([r.iter, repr(r.abs_residual), repr(r.rel_residual), r.rank_X, r.rank_R, r.rank_Z,
                        r.rank_P, r.rank_S, f"{r.seconds:.6f}"])


def pcg_solve(
    fun: Callable[[CanonicalTensor], CanonicalTensor],
    precond: Callable[[CanonicalTensor], CanonicalTensor],
    B: CanonicalTensor,
    X0: CanonicalTensor | None = None,
    cfg: PcgConfig | None = None,
    trunc: Callable[[CanonicalTensor, float, int], CanonicalTensor] | None = None,
) -> SolveReport:
    """Solve ``fun(X) = B`` by preconditioned CG in canonical format.

    ``trunc(t, eps, max_rank)`` defaults to :func:`truncate`. With
    ``cfg.eps == 0`` all truncations are skipped.
    """
    cfg = cfg or PcgConfig()
    trunc = trunc or (lambda t, eps, cap: truncate(t, eps, max_rank=cap, max_tucker_rank=cfg.tucker_cap))
    report = SolveReport(x=B, iterations=0)

    def tr(name, t):
        if cfg.eps == 0 or name not in cfg.truncate_at:
            return t
        out = trunc(t, cfg.eps, cfg.rank_cap)
        if t.rank > cfg.rank_cap and out.rank >= cfg.rank_cap:
            report.rank_cap_hit = True
        return out

    def check(t, what, k):
        if not (np.all(np.isfinite(t.weights)) and all(np.all(np.isfinite(U)) for U in t.factors)):
            raise PcgBreakdown(f"non-finite entries in {what}", k)

    X = X0 if X0 is not None else CanonicalTensor.zeros(B.shape)
    b_norm = canonical_norm(B)
    check(B, "right-hand side", 0)
    if b_norm == 0:
        report.x, report.converged, report.reason = CanonicalTensor.zeros(B.shape), True, "zero right-hand side"
        return report

    R = B - fun(X) if X.rank else B
    if R.rank > cfg.rank_cap and cfg.eps > 0:
        R = trunc(R, cfg.eps, cfg.rank_cap)
        report.notes.append(f"initial residual truncated to rank {R.rank}")
    Z = tr("Z", precond(R))
    P = Z
    for k in range(cfg.max_iter):
        t0 = time.perf_counter()
        S = tr("S", fun(P))
        ps = canonical_inner(P, S)
        if not math.isfinite(ps) or ps <= 0:
            raise PcgBreakdown(f"<P, S> = {ps:.3g} is not positive", k)
        alpha = canonical_inner(R, Z) / ps
        X = tr("X", X + P * alpha)
        R_old = R
        R = tr("R", R - S * alpha)
        check(X, "X", k)
        check(R, "R", k)
        r_norm = canonical_norm(R)
        rel = r_norm / b_norm
        if cfg.stop_rule == "relative":
            done = rel <= cfg.stop_tol
        else:
            done = abs(residual_integral(R)) <= cfg.stop_tol
        if not done:
            Z_new = tr("Z", precond(R))
            beta = canonical_inner(R, Z_new) / canonical_inner(Z, R_old)
            P = tr("P", Z_new + P * beta)
            Z = Z_new
        report.history.append(IterationRecord(k + 1, r_norm, rel, X.rank, R.rank, Z.rank, P.rank, S.rank,
                                              time.perf_counter() - t0))
        if done:
            report.x, report.iterations, report.converged = X, k + 1, True
            report.reason = f"{cfg.stop_rule} residual below tolerance"
            return report
    report.x, report.iterations = X, cfg.max_iter
    report.reason = "maximum number of iterations reached"
    return report
