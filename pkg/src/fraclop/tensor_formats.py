"""Canonical (CP) and Tucker tensors and the rank-truncation transforms.

A canonical tensor of order ``d`` is stored as a weight vector ``xi`` of
length ``R`` and ``d`` factor matrices of shape ``(n_l, R)`` with unit-norm
columns, so that

    T = sum_k xi_k  u_k^(1) o u_k^(2) o ... o u_k^(d).

The rank-0 tensor (empty factors) is the zero tensor. A Tucker tensor holds
a core of shape ``(r_1, ..., r_d)`` and orthonormal factors ``(n_l, r_l)``.

Only ``d = 2`` and ``d = 3`` are exercised by the solver, but most routines
here work for any order.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "CanonicalTensor",
    "TuckerTensor",
    "canonical_add",
    "canonical_hadamard",
    "canonical_inner",
    "canonical_norm",
    "full_to_tucker",
    "multigrid_tucker",
    "canonical_to_tucker",
    "tucker_to_canonical",
    "truncate",
    "eps_rank",
    "read_canon",
    "write_canon",
]


# dense reconstructions above this many entries are refused
DENSE_LIMIT = 1 << 24


def _check_dense(shape):
    size = int(np.prod(shape, dtype=np.int64))
    if size > DENSE_LIMIT:
        raise MemoryError(f"dense reconstruction of shape {tuple(shape)} exceeds {DENSE_LIMIT} entries")


def eps_rank(s: np.ndarray, tol: float) -> int:
    """Smallest ``r`` with ``sqrt(sum_{k>=r} s_k^2) <= tol``.

    ``s`` must be sorted in decreasing order. Equal singular values on both
    sides of the cut are kept together, so the rank rounds up.
    """
    s = np.asarray(s, dtype=float)
    if s.size == 0:
        return 0
    # tails[r] = norm of s[r:]
    tails = np.sqrt(np.cumsum((s**2)[::-1])[::-1])
    tails = np.append(tails, 0.0)
    r = int(np.argmax(tails <= tol))
    while 0 < r < s.size and s[r] == s[r - 1]:
        r += 1
    return r


def _khatri_rao(mats: Sequence[np.ndarray]) -> np.ndarray:
    # column-wise Kronecker product, first matrix varies slowest
    return reduce(
        lambda a, b: (a[:, None, :] * b[None, :, :]).reshape(-1, a.shape[1]), mats
    )


@dataclass(frozen=True, eq=False)
class CanonicalTensor:
    """Weighted sum of rank-1 tensors with unit-norm factor columns."""

    weights: np.ndarray
    factors: tuple[np.ndarray, ...]

    def __post_init__(self):
        R = self.weights.shape[0]
        if any(U.ndim != 2 or U.shape[1] != R for U in self.factors):
            raise ValueError("all factor matrices must have R columns")

    @classmethod
    def from_factors(cls, factors, weights=None) -> "CanonicalTensor":
        """Build a tensor from arbitrary factor columns, renormalizing them.

        Terms whose columns vanish in any mode are dropped.
        """
        factors = [np.array(U, dtype=float, ndmin=2, copy=True) for U in factors]
        if not factors:
            raise ValueError("need at least one mode")
        R = factors[0].shape[1]
        w = np.ones(R) if weights is None else np.array(weights, dtype=float).reshape(R)
        for U in factors:
            if U.shape[1] != R:
                raise ValueError("factor matrices disagree on the rank")
            nrm = np.linalg.norm(U, axis=0)
            w = w * nrm
            nz = nrm > 0
            U[:, nz] /= nrm[nz]
        keep = (w != 0) & np.isfinite(w)
        if not np.all(np.isfinite(w)):
            raise FloatingPointError("non-finite weight in canonical tensor")
        return cls(w[keep], tuple(U[:, keep] for U in factors))

    @classmethod
    def zeros(cls, shape) -> "CanonicalTensor":
        return cls(np.zeros(0), tuple(np.zeros((n, 0)) for n in shape))

    @classmethod
    def rank_one(cls, vectors, weight: float = 1.0) -> "CanonicalTensor":
        return cls.from_factors([np.asarray(v, float)[:, None] for v in vectors], [weight])

    @property
    def ndim(self) -> int:
        return len(self.factors)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(U.shape[0] for U in self.factors)

    @property
    def rank(self) -> int:
        return self.weights.shape[0]

    def full(self) -> np.ndarray:
        """Dense reconstruction. Intended for small tensors and tests."""
        _check_dense(self.shape)
        if self.rank == 0:
            return np.zeros(self.shape)
        first = self.factors[0] * self.weights
        rest = _khatri_rao(self.factors[1:]) if self.ndim > 1 else np.ones((1, self.rank))
        return (first @ rest.T).reshape(self.shape)

    def entries(self, *idx) -> np.ndarray:
        """Evaluate entries at (broadcastable) integer index arrays."""
        if len(idx) != self.ndim:
            raise ValueError("need one index array per mode")
        if self.rank == 0:
            return np.zeros(np.broadcast(*idx).shape)
        prod = self.weights
        for U, i in zip(self.factors, idx):
            prod = prod * U[np.asarray(i)]
        return prod.sum(axis=-1)

    def scale(self, c: float) -> "CanonicalTensor":
        if c == 0:
            return CanonicalTensor.zeros(self.shape)
        return CanonicalTensor(self.weights * c, self.factors)

    def __add__(self, other):
        return canonical_add(self, other)

    def __sub__(self, other):
        return canonical_add(self, other.scale(-1.0))

    def __neg__(self):
        return self.scale(-1.0)

    def __mul__(self, c):
        return self.scale(float(c))

    __rmul__ = __mul__

    def __repr__(self):
        return f"CanonicalTensor(shape={self.shape}, rank={self.rank})"


@dataclass(frozen=True, eq=False)
class TuckerTensor:
    """Orthogonal Tucker tensor ``core x_1 V1 x_2 V2 ... x_d Vd``."""

    core: np.ndarray
    factors: tuple[np.ndarray, ...]

    def __post_init__(self):
        if self.core.ndim != len(self.factors):
            raise ValueError("core order does not match number of factors")
        for r, V in zip(self.core.shape, self.factors):
            if V.shape[1] != r or r > V.shape[0]:
                raise ValueError("factor shape inconsistent with core")

    @property
    def ndim(self) -> int:
        return self.core.ndim

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(V.shape[0] for V in self.factors)

    @property
    def ranks(self) -> tuple[int, ...]:
        return self.core.shape

    def full(self) -> np.ndarray:
        _check_dense(self.shape)
        t = self.core
        for mode, V in enumerate(self.factors):
            t = np.moveaxis(np.tensordot(V, t, axes=(1, mode)), 0, mode)
        return t

    def entries(self, *idx) -> np.ndarray:
        rows = [V[np.asarray(i)] for V, i in zip(self.factors, idx)]
        shape = np.broadcast(*idx).shape
        rows = [np.broadcast_to(r, shape + r.shape[-1:]).reshape(-1, r.shape[-1]) for r in rows]
        out = np.einsum("pa,pb,ab->p", rows[0], rows[1], self.core.reshape(rows[0].shape[1], -1)
                        ) if self.ndim == 2 else _tucker3_entries(self.core, rows)
        return out.reshape(shape)

    def __repr__(self):
        return f"TuckerTensor(shape={self.shape}, ranks={self.ranks})"


def _tucker3_entries(core, rows):
    tmp = np.einsum("abc,pc->pab", core, rows[2])
    tmp = np.einsum("pab,pb->pa", tmp, rows[1])
    return np.einsum("pa,pa->p", tmp, rows[0])


def _check_shapes(a: CanonicalTensor, b: CanonicalTensor):
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def canonical_add(a: CanonicalTensor, b: CanonicalTensor) -> CanonicalTensor:
    """Concatenate the terms of ``a`` and ``b`` (rank-additive, exact)."""
    _check_shapes(a, b)
    return CanonicalTensor(
        np.concatenate([a.weights, b.weights]),
        tuple(np.hstack([U, V]) for U, V in zip(a.factors, b.factors)),
    )


def canonical_hadamard(a: CanonicalTensor, b: CanonicalTensor) -> CanonicalTensor:
    """Entrywise product; the rank is ``rank(a) * rank(b)``."""
    _check_shapes(a, b)
    Ra, Rb = a.rank, b.rank
    factors = [(U[:, :, None] * V[:, None, :]).reshape(U.shape[0], Ra * Rb)
               for U, V in zip(a.factors, b.factors)]
    weights = np.outer(a.weights, b.weights).ravel()
    return CanonicalTensor.from_factors(factors, weights)


def canonical_inner(a: CanonicalTensor, b: CanonicalTensor, block: int = 2048) -> float:
    """Euclidean scalar product via per-mode Gram matrices, O(d Ra Rb n).

    Rows of the Gram product are processed in blocks so memory stays at
    O(block * Rb) for large ranks.
    """
    _check_shapes(a, b)
    if a.rank == 0 or b.rank == 0:
        return 0.0
    total = 0.0
    for lo in range(0, a.rank, block):
        sl = slice(lo, lo + block)
        G = np.outer(a.weights[sl], b.weights)
        for U, V in zip(a.factors, b.factors):
            G *= U[:, sl].T @ V
        total += float(G.sum())
    return total


def canonical_norm(a: CanonicalTensor) -> float:
    return float(np.sqrt(max(canonical_inner(a, a), 0.0)))


def _unfold(t: np.ndarray, mode: int) -> np.ndarray:
    return np.moveaxis(t, mode, 0).reshape(t.shape[mode], -1)


def _leading_subspace(M: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Left singular vectors of ``M`` whose discarded tail is below ``tol``."""
    Q, s, _ = np.linalg.svd(M, full_matrices=False)
    r = eps_rank(s, tol)
    return Q[:, :r], s


def _project_core(t: np.ndarray, factors) -> np.ndarray:
    core = t
    for mode, V in enumerate(factors):
        core = np.moveaxis(np.tensordot(V.T, core, axes=(1, mode)), 0, mode)
    return core


def full_to_tucker(t: np.ndarray, eps: float) -> TuckerTensor:
    """HOSVD of a dense tensor with relative Frobenius accuracy ``eps``.

    Each mode discards a tail of at most ``eps * ||t|| / sqrt(d)``, which by
    the HOSVD error bound keeps the total error below ``eps * ||t||``.
    """
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ValueError("tensor has non-finite entries")
    nrm = np.linalg.norm(t)
    if nrm == 0:
        return TuckerTensor(np.zeros((0,) * t.ndim), tuple(np.zeros((n, 0)) for n in t.shape))
    tol = eps * nrm / np.sqrt(t.ndim)
    factors = tuple(_leading_subspace(_unfold(t, m), tol)[0] for m in range(t.ndim))
    return TuckerTensor(_project_core(t, factors), factors)


def _coarsen(idx: np.ndarray) -> np.ndarray:
    return idx[1::2]


def _prolong(V: np.ndarray, coarse_pos: np.ndarray, fine_pos: np.ndarray) -> np.ndarray:
    W = np.column_stack([np.interp(fine_pos, coarse_pos, V[:, j]) for j in range(V.shape[1])])
    Q, _ = np.linalg.qr(W)
    return Q


def _pad_basis(V: np.ndarray, rng) -> np.ndarray:
    """Append random orthonormal directions to the columns of ``V``."""
    n, r = V.shape
    p = min(max(4, r // 2), n - r)
    if p <= 0:
        return V
    W = rng.standard_normal((n, p))
    W -= V @ (V.T @ W)
    Q, _ = np.linalg.qr(W)
    return np.hstack([V, Q])


def _projected_unfolding(entry_fn, grids, factors, mode, block=1 << 22):
    """Mode-``mode`` unfolding of ``T x_{m != mode} V_m^T`` (d = 2 or 3).

    The entry function is evaluated one slab of mode-``mode`` indices at a
    time so that no full d-way array is ever held.
    """
    d = len(grids)
    others = [m for m in range(d) if m != mode]
    n_mode = grids[mode].size
    slab = int(max(1, block // max(1, np.prod([grids[m].size for m in others]))))
    ranks = [factors[m].shape[1] for m in others]
    out = np.empty((n_mode, int(np.prod(ranks))))
    for start in range(0, n_mode, slab):
        sel = grids[mode][start:start + slab]
        axes = [grids[m] if m != mode else sel for m in range(d)]
        block_vals = entry_fn(*np.ix_(*axes))
        block_vals = np.moveaxis(block_vals, mode, 0)
        for m in others:
            # contract the next remaining (non-leading) axis
            block_vals = np.tensordot(block_vals, factors[m], axes=(1, 0))
        out[start:start + sel.size] = block_vals.reshape(sel.size, -1)
    return out


def multigrid_tucker(
    entry_fn: Callable[..., np.ndarray],
    n_fine,
    eps: float,
    n_coarse: int = 31,
    sweeps: int = 5,
    ndim: int = 3,
) -> TuckerTensor:
    """Tucker approximation of a function-generated tensor on nested grids.

    ``entry_fn(i_1, ..., i_d)`` evaluates the tensor at broadcastable 0-based
    index arrays of the finest grid. The coarse grids are the odd-position
    subsets (0-based ``1, 3, 5, ...``) of the next finer one, so for
    ``n = 2 m + 1`` the hierarchy nests exactly (31, 63, 127, ...). A full
    HOSVD is computed on the coarsest grid only; each finer level starts from
    linearly interpolated coarse factors and runs at most ``sweeps``
    orthogonal-iteration passes. Ranks adapt on every level.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    shape = (n_fine,) * ndim if np.isscalar(n_fine) else tuple(int(n) for n in n_fine)
    d = len(shape)
    hierarchy = [[np.arange(n) for n in shape]]
    while max(g.size for g in hierarchy[-1]) > n_coarse and min(g.size for g in hierarchy[-1]) >= 4:
        hierarchy.append([_coarsen(g) for g in hierarchy[-1]])
    hierarchy.reverse()
    if min(g.size for g in hierarchy[0]) < 1:
        raise ValueError("grid hierarchy is degenerate")

    coarse = hierarchy[0]
    dense = np.asarray(entry_fn(*np.ix_(*coarse)), dtype=float)
    tk = full_to_tucker(dense, eps)
    factors = list(tk.factors)
    core = tk.core
    if core.size == 0:
        return TuckerTensor(core, tuple(np.zeros((n, 0)) for n in shape))

    rng = np.random.default_rng(0)
    for prev, grids in zip(hierarchy[:-1], hierarchy[1:]):
        factors = [_prolong(V, p, g) for V, p, g in zip(factors, prev, grids)]
        last = None
        for _ in range(sweeps):
            for mode in range(d):
                # in 2D the projected unfolding has only r columns, so the rank
                # could never grow past the coarse one without padding
                proj = factors if d > 2 else [_pad_basis(V, rng) for V in factors]
                Y = _projected_unfolding(entry_fn, grids, proj, mode)
                tol = eps * np.linalg.norm(Y) / np.sqrt(d)
                factors[mode], s = _leading_subspace(Y, tol)
            r = factors[-1].shape[1]
            core_energy = float(np.sum(s[:r] ** 2))
            if last is not None and abs(core_energy - last) <= (eps**2) * core_energy:
                break
            last = core_energy
        if d == 2:
            Y = _projected_unfolding(entry_fn, grids, factors, d - 1)
        # core from the final projected unfolding of the last mode
        core = np.moveaxis(
            (factors[-1].T @ Y).reshape((factors[-1].shape[1],) + tuple(V.shape[1] for V in factors[:-1])),
            0, d - 1,
        )
    return TuckerTensor(core, tuple(factors))


def canonical_to_tucker(a: CanonicalTensor, eps: float, tol: float | None = None,
                        max_rank: int | None = None) -> TuckerTensor:
    """Reduced HOSVD: Tucker factors from SVDs of the weighted side matrices.

    The mode-l side matrix is ``U_l diag(xi)``; its singular vectors are cut
    at the tail ``eps * ||xi||`` (or at the absolute ``tol`` if given), and
    at most ``max_rank`` are kept per mode. The core is the exact projection
    of ``a`` onto the kept subspaces. Cost is O(d n^2 R + R r^d); the dense
    tensor is never formed.
    """
    if a.rank == 0:
        return TuckerTensor(np.zeros((0,) * a.ndim), tuple(np.zeros((n, 0)) for n in a.shape))
    if tol is None:
        tol = eps * float(np.linalg.norm(a.weights))
    tol_mode = tol / np.sqrt(a.ndim)
    factors = []
    for U in a.factors:
        V, _ = _leading_subspace(U * np.abs(a.weights), tol_mode)
        factors.append(V if max_rank is None else V[:, :max_rank])
    return TuckerTensor(_canonical_core(a, factors), tuple(factors))


def _canonical_core(a: CanonicalTensor, factors, block: int = 4096) -> np.ndarray:
    W = [V.T @ U for V, U in zip(factors, a.factors)]
    ranks = tuple(V.shape[1] for V in factors)
    if len(W) == 1:
        return W[0] @ a.weights
    core = np.zeros((ranks[0], int(np.prod(ranks[1:]))))
    for lo in range(0, a.rank, block):
        sl = slice(lo, lo + block)
        core += (W[0][:, sl] * a.weights[sl]) @ _khatri_rao([w[:, sl] for w in W[1:]]).T
    return core.reshape(ranks)


def tucker_to_canonical(t: TuckerTensor, eps: float, tol: float | None = None,
                        max_core_rank: int = 400) -> CanonicalTensor:
    """Convert a (small-core) Tucker tensor to canonical form.

    In 2D this is the SVD of the core. In 3D the core is split into slices
    along one mode and each slice is SVD-compressed; since all retained
    terms are mutually orthogonal, the discarded singular values give the
    error exactly. The slicing mode yielding the smallest rank is used.
    Output rank is at most ``r_a * r_b`` for the two smallest ranks.
    """
    d = t.ndim
    if max(t.ranks, default=0) > max_core_rank:
        raise ValueError(f"Tucker core too large for conversion: ranks {t.ranks}")
    if t.core.size == 0 or not np.any(t.core):
        return CanonicalTensor.zeros(t.shape)
    if tol is None:
        tol = eps * float(np.linalg.norm(t.core))
    if d == 1:
        return CanonicalTensor.from_factors([t.factors[0] @ t.core[:, None]])
    if d == 2:
        P, s, Qt = np.linalg.svd(t.core, full_matrices=False)
        r = max(1, eps_rank(s, tol))
        return CanonicalTensor.from_factors([t.factors[0] @ P[:, :r], t.factors[1] @ Qt[:r].T], s[:r])
    if d != 3:
        raise ValueError("tucker_to_canonical supports d <= 3")

    best = None
    for m in range(3):
        a, b = [k for k in range(3) if k != m]
        slices = np.moveaxis(t.core, m, 0)
        svals, terms = [], []
        for nu, S in enumerate(slices):
            P, s, Qt = np.linalg.svd(S, full_matrices=False)
            for j in range(s.size):
                if s[j] > 0:
                    svals.append(s[j])
                    terms.append((nu, P[:, j], Qt[j]))
        svals = np.asarray(svals)
        order = np.argsort(-svals, kind="stable")
        r = max(1, eps_rank(svals[order], tol))
        if best is None or r < best[0]:
            best = (r, m, a, b, svals, order, terms)
    r, m, a, b, svals, order, terms = best
    if t.core.size <= 64 and r > max(t.ranks):
        # tiny core: the slice split can miss the true rank (e.g. 4 instead of 3
        # for lam_i + lam_j + lam_k); try a direct CP fit of the core
        for R in range(max(t.ranks), r):
            cp = _cp_als(t.core, R, tol)
            if cp is not None:
                w, fs = cp
                return CanonicalTensor.from_factors([V @ F for V, F in zip(t.factors, fs)], w)
    keep = order[:r]
    cols = {m: [], a: [], b: []}
    for k in keep:
        nu, p, q = terms[k]
        cols[m].append(t.factors[m][:, nu])
        cols[a].append(t.factors[a] @ p)
        cols[b].append(t.factors[b] @ q)
    factors = [np.column_stack(cols[k]) for k in range(3)]
    return CanonicalTensor.from_factors(factors, svals[keep])


def _cp_als(core: np.ndarray, R: int, tol: float, iters: int = 500, restarts: int = 4):
    """Rank-``R`` CP fit of a small dense tensor by alternating least squares.

    Returns ``(weights, factors)`` once the Frobenius error is below ``tol``,
    otherwise ``None``. Restarts use a fixed seed, so the result is
    deterministic.
    """
    rng = np.random.default_rng(0)
    d = core.ndim
    unf = [_unfold(core, m) for m in range(d)]
    for _ in range(restarts):
        A = [rng.standard_normal((n, R)) for n in core.shape]
        prev = np.inf
        for it in range(iters):
            for m in range(d):
                kr = _khatri_rao([A[k] for k in range(d) if k != m])
                A[m] = np.linalg.lstsq(kr, unf[m].T, rcond=None)[0].T
            err = np.linalg.norm(A[0] @ _khatri_rao(A[1:]).T - unf[0])
            if err <= tol:
                return np.ones(R), A
            if it % 20 == 19:
                if err > 0.99 * prev:  # stalled
                    break
                prev = err
    return None


def _keep_largest(a: CanonicalTensor, r: int) -> CanonicalTensor:
    order = np.argsort(-np.abs(a.weights), kind="stable")[:r]
    return CanonicalTensor(a.weights[order], tuple(U[:, order] for U in a.factors))


def _merge_parallel(a: CanonicalTensor, tol: float = 1e-12) -> CanonicalTensor:
    """Sum terms whose factors are parallel in every mode (exact rank reduction)."""
    G = np.ones((a.rank, a.rank))
    for U in a.factors:
        G *= U.T @ U
    close = np.abs(G) >= 1.0 - tol
    if close.sum() == a.rank:
        return a
    free = np.ones(a.rank, dtype=bool)
    keep, weights = [], []
    for i in range(a.rank):
        if not free[i]:
            continue
        group = close[i] & free
        free &= ~group
        keep.append(i)
        weights.append(float(np.sum(a.weights[group] * np.sign(G[i, group]))))
    keep, weights = np.array(keep), np.array(weights)
    nz = np.abs(weights) > tol * np.abs(a.weights).max()
    return CanonicalTensor(weights[nz], tuple(U[:, keep[nz]] for U in a.factors))


def truncate(a: CanonicalTensor, eps: float, max_rank: int | None = None,
             max_tucker_rank: int | None = None, exact_norm_limit: int = 1500) -> CanonicalTensor:
    """Reduce the rank of ``a`` with relative Frobenius accuracy about ``eps``.

    2D: reduced SVD of ``U1 diag(xi) U2^T`` through QR of both factor
    matrices (exact error control). 3D: terms parallel in every mode are
    merged first, then a reduced HOSVD is followed by the
    Tucker-to-canonical transform, each using half of the error budget
    relative to ``||a||``. For ranks above ``exact_norm_limit`` the norm is
    taken from a preliminary reduced HOSVD at a ten times tighter tolerance
    instead of the O(R^2 n) Gram computation. ``max_rank`` caps the output
    rank (largest terms kept) and ``max_tucker_rank`` the intermediate
    Tucker ranks.
    """
    if a.rank <= 1:
        return a
    d = a.ndim
    if d == 2:
        Q1, R1 = np.linalg.qr(a.factors[0])
        Q2, R2 = np.linalg.qr(a.factors[1])
        P, s, Qt = np.linalg.svd((R1 * a.weights) @ R2.T, full_matrices=False)
        r = eps_rank(s, eps * float(np.linalg.norm(s)))
        if max_rank is not None:
            r = min(r, max_rank)
        if r == 0:
            return CanonicalTensor.zeros(a.shape)
        return CanonicalTensor.from_factors([Q1 @ P[:, :r], Q2 @ Qt[:r].T], s[:r])

    if a.rank <= exact_norm_limit:
        a = _merge_parallel(a)
        if a.rank <= 1:
            return a
        nrm = canonical_norm(a)
        if nrm == 0:
            return CanonicalTensor.zeros(a.shape)
        tk = canonical_to_tucker(a, eps, tol=eps * nrm / np.sqrt(2.0), max_rank=max_tucker_rank)
    else:
        pre = canonical_to_tucker(a, eps, tol=0.1 * eps * float(np.linalg.norm(a.weights)),
                                  max_rank=max_tucker_rank)
        nrm = float(np.linalg.norm(pre.core))
        if nrm == 0:
            return CanonicalTensor.zeros(a.shape)
        sub = full_to_tucker(pre.core, eps / np.sqrt(2.0))
        if max_tucker_rank is not None:
            sub = TuckerTensor(sub.core[tuple(slice(0, max_tucker_rank) for _ in range(d))],
                               tuple(V[:, :max_tucker_rank] for V in sub.factors))
            sub = TuckerTensor(_project_core(pre.core, sub.factors), sub.factors)
        tk = TuckerTensor(sub.core, tuple(F @ V for F, V in zip(pre.factors, sub.factors)))
    out = tucker_to_canonical(tk, eps, tol=eps * nrm / np.sqrt(2.0))
    if out.rank >= a.rank and (max_rank is None or a.rank <= max_rank):
        # the transform only helps if it lowers the rank; otherwise keep the exact input
        out = a
    if max_rank is not None and out.rank > max_rank:
        out = _keep_largest(out, max_rank)
    return out


def write_canon(path, a: CanonicalTensor) -> None:
    """Write ``a`` in the plain-text CANON format (17 significant digits)."""
    lines = [f"CANON {a.ndim} {a.rank} " + " ".join(str(n) for n in a.shape)]
    fmt = "%.17g"
    lines.append(" ".join(fmt % w for w in a.weights))
    for U in a.factors:
        for row in U:
            lines.append(" ".join(fmt % v for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_canon(path) -> CanonicalTensor:
    text = Path(path).read_text().splitlines()
    head = text[0].split()
    if not head or head[0] != "CANON":
        raise ValueError(f"{path}: not a CANON file")
    d, R = int(head[1]), int(head[2])
    shape = [int(v) for v in head[3:3 + d]]
    if len(shape) != d:
        raise ValueError(f"{path}: header lists {len(shape)} mode sizes, expected {d}")
    weights = np.array(text[1].split(), dtype=float) if R else np.zeros(0)
    pos = 2
    factors = []
    for n in shape:
        rows = text[pos:pos + n]
        pos += n
        U = np.array([r.split() for r in rows], dtype=float).reshape(n, R) if R else np.zeros((n, 0))
        factors.append(U)
    return CanonicalTensor(weights, tuple(factors))
