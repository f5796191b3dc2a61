"""Dense real matrix kernel used by every solver in the package.

Matrices are plain ``numpy.ndarray`` in row-major order.  All tolerances are
relative to the Frobenius norm of the input with an absolute floor of 1e-12,
so the kernel behaves identically across the scales that show up here
(normalized gains around 1, tire forces around 1e5).
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

ABS_FLOOR = 1e-12


class NotPositiveDefinite(Exception):
    """Cholesky failure.  ``pivot`` is the 1-based index of the failing pivot."""

    def __init__(self, pivot: int):
        self.pivot = pivot
        super().__init__(f"matrix is not positive definite (pivot {pivot})")


class SingularMatrix(Exception):
    """Linear solve rejected: matrix is singular or numerically unusable."""


class SymEigResult(NamedTuple):
    eigenvalues: np.ndarray   # ascending
    eigenvectors: np.ndarray  # orthonormal columns, M @ V = V @ diag(w)


def _as_square(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


def kron(a, b) -> np.ndarray:
    """Kronecker product of two finite real matrices."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("kron requires finite entries")
    return np.kron(a, b)


def sym(m) -> np.ndarray:
    """Symmetric part (M + M^T) / 2."""
    m = _as_square(m)
    return 0.5 * (m + m.T)


def eig_sym(m) -> SymEigResult:
    """Eigendecomposition of a (nearly) symmetric matrix.

    The input is symmetrized first; eigenvalues come back ascending and the
    eigenvector matrix is orthonormal to 1e-8.
    """
    w, v = np.linalg.eigh(sym(m))
    return SymEigResult(w, v)


def jacobi_eig_sym(m, tol: float = 1e-12, max_sweeps: int = 60) -> SymEigResult:
    """Cyclic Jacobi eigensolver.

    Reference implementation kept as an independent cross-check of
    :func:`eig_sym`; it is pure Python and only meant for small matrices in
    tests.
    """
    a = sym(m).copy()
    n = a.shape[0]
    v = np.eye(n)
    scale = max(np.linalg.norm(a), ABS_FLOOR)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p, q]) <= 0.1 * tol * scale / max(n, 1):
                    continue
                # classic 2x2 rotation annihilating a[p, q]
                theta = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                v = v @ rot
    w = np.diag(a)
    order = np.argsort(w)
    return SymEigResult(w[order], v[:, order])


def is_neg_def(m, margin: float = 0.0) -> bool:
    """True iff the largest eigenvalue of sym(m) is below ``-margin``."""
    w, _ = eig_sym(m)
    return bool(w[-1] < -margin)


def chol(m) -> np.ndarray:
    """Lower-triangular Cholesky factor of a symmetric PD matrix.

    Raises :class:`NotPositiveDefinite` with the failing pivot (1-based) when
    the matrix is not positive definite.
    """
    a = sym(m)
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        pass
    # Slow path only to locate the failing pivot for the error message.
    n = a.shape[0]
    l = np.zeros_like(a)
    for j in range(n):
        d = a[j, j] - l[j, :j] @ l[j, :j]
        if d <= 0.0 or not np.isfinite(d):
            raise NotPositiveDefinite(j + 1)
        l[j, j] = np.sqrt(d)
        if j + 1 < n:
            l[j + 1:, j] = (a[j + 1:, j] - l[j + 1:, :j] @ l[j, :j]) / l[j, j]
    return l  # pragma: no cover - unreachable when numpy already failed


def solve_linear(a, b, cond_limit: float = 1e12) -> np.ndarray:
    """Solve ``a @ x = b`` by LU with partial pivoting.

    Rejects matrices whose 2-norm condition estimate exceeds ``cond_limit``.
    """
    a = _as_square(a)
    b_arr = np.asarray(b, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ValueError("solve_linear requires finite entries")
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > cond_limit:
        raise SingularMatrix(f"condition estimate {cond:.3e} exceeds {cond_limit:.1e}")
    return np.linalg.solve(a, b_arr)
