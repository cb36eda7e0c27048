"""1D finite-difference Sturm-Liouville operators and the sine basis.

Grid convention: ``n`` interior points ``x_i = i h`` with ``h = 1/(n+1)``;
homogeneous Dirichlet values are eliminated. All assembled matrices are the
positive definite discretizations of ``-(a u')'``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.fft
import scipy.linalg

__all__ = [
    "Coefficient1D",
    "COEFFICIENTS",
    "get_coefficient",
    "coefficient_from_csv",
    "SturmLiouville1D",
    "assemble_sturm_liouville",
    "eig_sym_tridiag",
    "tridiag_ql",
    "laplace_eigenpairs",
    "sine_transform",
    "midpoints",
]


@dataclass(frozen=True)
class Coefficient1D:
    """A diffusion coefficient ``a(x)`` on [0, 1]."""

    name: str
    func: Callable[[np.ndarray], np.ndarray]

    def __call__(self, x):
        return np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float)


def _tabulated(x_tab, a_tab):
    x_tab = np.asarray(x_tab, float)
    a_tab = np.asarray(a_tab, float)
    return lambda x: np.interp(x, x_tab, a_tab)


COEFFICIENTS = {
    "a1": Coefficient1D("a1", lambda x: np.sin(100 * np.pi * x) + 1.1),
    "a2": Coefficient1D("a2", lambda x: np.sin(x) * np.cos(x)),
    "a2_modified": Coefficient1D("a2_modified", lambda x: np.sin(x) * np.cos(x) + 0.1),
    "a3": Coefficient1D("a3", lambda x: np.cos(5 * np.pi * x) + 2),
    "unit": Coefficient1D("unit", lambda x: np.ones_like(x)),
}


def get_coefficient(name: str) -> Coefficient1D:
    try:
        return COEFFICIENTS[name]
    except KeyError:
        raise ValueError(f"unknown coefficient {name!r}; known: {sorted(COEFFICIENTS)}") from None


def coefficient_from_csv(path, allow_degenerate: bool = False) -> Coefficient1D:
    """Read a two-column ``x, a(x)`` CSV sampled at the midpoints.

    Values between samples are linearly interpolated.
    """
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                if rows:
                    raise
                continue  # header line
    if not rows:
        raise ValueError(f"{path}: no coefficient samples")
    x, a = np.array(rows).T
    if not np.all(np.isfinite(a)) or not np.all(np.isfinite(x)):
        raise ValueError(f"{path}: non-finite coefficient values")
    if not allow_degenerate and np.any(a <= 0):
        raise ValueError(f"{path}: coefficient must be strictly positive")
    order = np.argsort(x)
    return Coefficient1D(Path(path).stem, _tabulated(x[order], a[order]))


def midpoints(n: int) -> np.ndarray:
    """Midpoints ``x_{i+1/2}``, i = 0..n, of the grid with n interior points."""
    h = 1.0 / (n + 1)
    return (np.arange(n + 1) + 0.5) * h


@dataclass(frozen=True, eq=False)
class SturmLiouville1D:
    """Symmetric tridiagonal ``A`` plus (optionally) its eigen-decomposition.

    ``eigvecs`` has the eigenvectors as columns, so ``A = G diag(lam) G^T``
    with ``G = eigvecs`` (the transposed convention ``G_l = eigvecs.T`` gives
    ``A = G_l^T Lambda G_l``).
    """

    n: int
    h: float
    diag: np.ndarray
    offdiag: np.ndarray
    coef_samples: np.ndarray
    eigvals: np.ndarray | None = field(default=None, repr=False)
    eigvecs: np.ndarray | None = field(default=None, repr=False)

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = self.diag[:, None] * v if v.ndim == 2 else self.diag * v
        off = self.offdiag[:, None] if v.ndim == 2 else self.offdiag
        out[:-1] += off * v[1:]
        out[1:] += off * v[:-1]
        return out

    def with_eigen(self, method: str = "lapack") -> "SturmLiouville1D":
        if self.eigvals is not None:
            return self
        lam, G = eig_sym_tridiag(self, method=method)
        return SturmLiouville1D(self.n, self.h, self.diag, self.offdiag, self.coef_samples, lam, G)


def assemble_sturm_liouville(coef, n: int, boundary: str = "paper") -> SturmLiouville1D:
    """Tridiagonal FD matrix of ``-(a u')'`` with midpoint coefficient samples.

    Off-diagonals are ``-a_{i+1/2}/h^2``; interior diagonals
    ``(a_{i-1/2} + a_{i+1/2})/h^2``. With ``boundary="paper"`` the first and
    last diagonal entries are ``2 a_{3/2}/h^2`` and ``2 a_{n-1/2}/h^2``; with
    ``boundary="standard"`` they use ``a_{1/2} + a_{3/2}`` and
    ``a_{n-1/2} + a_{n+1/2}``.
    """
    if n < 2:
        raise ValueError("need at least 2 interior points")
    h = 1.0 / (n + 1)
    a = np.asarray(coef(midpoints(n)), dtype=float)  # a[i] = a_{i+1/2}, i = 0..n
    if not np.all(np.isfinite(a)):
        raise ValueError("coefficient is not finite at a midpoint")
    diag = a[:-1] + a[1:]
    if boundary == "paper":
        diag[0] = 2 * a[1]
        diag[-1] = 2 * a[n - 1]
    elif boundary != "standard":
        raise ValueError(f"unknown boundary rule {boundary!r}")
    off = -a[1:n]
    return SturmLiouville1D(n, h, diag / h**2, off / h**2, a)


def tridiag_ql(diag, offdiag, max_iter: int | None = None):
    """Implicit-shift QL iteration for a symmetric tridiagonal matrix.

    Returns ascending eigenvalues and the eigenvector matrix (columns).
    Rotations are applied to whole rows of the accumulated transform at once.
    """
    d = np.array(diag, dtype=float)
    n = d.size
    e = np.zeros(n)
    e[: n - 1] = offdiag
    Z = np.eye(n)  # rows are rotated; eigenvectors are the rows at the end
    cap = 30 * n if max_iter is None else max_iter
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= np.finfo(float).eps * dd:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > cap:
                raise np.linalg.LinAlgError(f"QL iteration did not converge for eigenvalue {l}")
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = np.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + np.copysign(r, g))
            s = c = 1.0
            p = 0.0
            i = m - 1
            underflow = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = np.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                zi1 = Z[i + 1].copy()
                Z[i + 1] = s * Z[i] + c * zi1
                Z[i] = c * Z[i] - s * zi1
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    order = np.argsort(d, kind="stable")
    return d[order], Z[order].T


def eig_sym_tridiag(matrix: SturmLiouville1D, method: str = "lapack"):
    """Ascending eigenvalues and orthonormal eigenvectors (as columns).

    ``method="lapack"`` calls LAPACK's tridiagonal solver (MRRR, falling
    back to the implicit QL/QR driver if MRRR fails, which happens for
    strongly graded coefficients); ``method="ql"`` runs the implicit QL
    iteration in :func:`tridiag_ql`.
    """
    if method == "ql":
        lam, G = tridiag_ql(matrix.diag, matrix.offdiag)
    elif method == "lapack":
        try:
            lam, G = scipy.linalg.eigh_tridiagonal(matrix.diag, matrix.offdiag)
        except np.linalg.LinAlgError:
            lam, G = scipy.linalg.eigh_tridiagonal(matrix.diag, matrix.offdiag, lapack_driver="stev")
    else:
        raise ValueError(f"unknown eigensolver {method!r}")
    # fix signs for reproducibility: largest-magnitude entry of each vector positive
    idx = np.argmax(np.abs(G), axis=0)
    G = G * np.sign(G[idx, np.arange(G.shape[1])])
    return lam, G


def laplace_eigenpairs(n: int) -> np.ndarray:
    """Eigenvalues ``(4/h^2) sin^2(pi k h / 2)``, k = 1..n, of the 1D ``-Laplacian``.

    The matching eigenvectors are the orthonormal DST-I modes, applied with
    :func:`sine_transform`.
    """
    if n < 2:
        raise ValueError("need at least 2 interior points")
    h = 1.0 / (n + 1)
    k = np.arange(1, n + 1)
    return 4.0 / h**2 * np.sin(np.pi * k * h / 2) ** 2


def sine_transform(v: np.ndarray, axis: int = 0) -> np.ndarray:
    """Orthonormal DST-I along ``axis``; symmetric and self-inverse."""
    return scipy.fft.dst(np.asarray(v, dtype=float), type=1, norm="ortho", axis=axis)
