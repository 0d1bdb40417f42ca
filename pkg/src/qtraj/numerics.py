"""Small dense complex linear algebra used throughout the package.

Everything here operates on plain ``numpy`` arrays (``complex128``); a
"matrix" is a 2-D array, a "vector" a 1-D array.  Matrices in this package
are tiny (system dimension <= 4, vectorized superoperators <= 16), so all
storage is dense and all routines are backed by scipy's dense kernels
(Pade scaling-and-squaring for the exponential, LU with partial pivoting
for solves) behind explicit validation and error contracts.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm, lu_factor, lu_solve

__all__ = [
    "DimensionError",
    "SingularMatrixError",
    "as_matrix",
    "as_vector",
    "mat_exp",
    "solve_linear",
    "dagger",
    "is_hermitian",
    "require_hermitian",
    "vec",
    "unvec",
    "left_mult",
    "right_mult",
]

SINGULARITY_RTOL = 1e-14


class DimensionError(ValueError):
    """Raised when an operand has the wrong shape."""


class SingularMatrixError(ValueError):
    """Raised when a linear solve meets a numerically singular matrix."""


def as_matrix(m, square: bool = False) -> np.ndarray:
    """Validate and return ``m`` as a finite complex 2-D array."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise DimensionError(f"expected a matrix, got array of ndim {a.ndim}")
    if square and a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a.view(float))):
        raise ValueError("matrix has non-finite entries")
    return a


def as_vector(v) -> np.ndarray:
    """Validate and return ``v`` as a finite complex 1-D array."""
    a = np.asarray(v, dtype=complex)
    if a.ndim != 1:
        raise DimensionError(f"expected a vector, got array of ndim {a.ndim}")
    if not np.all(np.isfinite(a.view(float))):
        raise ValueError("vector has non-finite entries")
    return a


def mat_exp(m, t: float = 1.0) -> np.ndarray:
    """Matrix exponential exp(t*m) of a square complex matrix.

    Parameters
    ----------
    m : array_like, square
    t : float
        Scale factor applied before exponentiation.

    Raises
    ------
    DimensionError
        If ``m`` is not square.
    """
    a = as_matrix(m, square=True)
    if not np.isfinite(t):
        raise ValueError("scale t must be finite")
    if a.shape[0] == 0:
        return np.zeros((0, 0), dtype=complex)
    return expm(t * a)


def solve_linear(m, b) -> np.ndarray:
    """Solve m @ x = b by LU factorization with partial pivoting.

    Accepts ``b`` as a vector or a matrix of stacked right-hand sides.

    Raises
    ------
    DimensionError
        If ``m`` is not square or ``b`` has incompatible length.
    SingularMatrixError
        If a pivot falls below ``SINGULARITY_RTOL * norm(m)``.
    """
    a = as_matrix(m, square=True)
    rhs = np.asarray(b, dtype=complex)
    if rhs.shape[0] != a.shape[0]:
        raise DimensionError(
            f"rhs of length {rhs.shape[0]} incompatible with matrix of size {a.shape[0]}"
        )
    scale = np.linalg.norm(a, ord=np.inf)
    if scale == 0.0:
        raise SingularMatrixError("zero matrix is singular")
    lu, piv = lu_factor(a)
    pivots = np.abs(np.diag(lu))
    if np.min(pivots) < SINGULARITY_RTOL * scale:
        raise SingularMatrixError(
            f"matrix numerically singular (min pivot {np.min(pivots):.3e}, "
            f"threshold {SINGULARITY_RTOL * scale:.3e})"
        )
    return lu_solve((lu, piv), rhs)


def dagger(m: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return np.conj(m).T


def is_hermitian(m: np.ndarray, tol: float = 1e-12) -> bool:
    a = np.asarray(m, dtype=complex)
    return a.ndim == 2 and a.shape[0] == a.shape[1] and np.max(np.abs(a - dagger(a))) <= tol


def require_hermitian(m, tol: float = 1e-10, name: str = "matrix") -> np.ndarray:
    a = as_matrix(m, square=True)
    dev = np.max(np.abs(a - dagger(a))) if a.size else 0.0
    if dev > tol:
        raise ValueError(f"{name} is not Hermitian (deviation {dev:.3e})")
    return a


# Row-major vectorization.  With vec(rho) = rho.reshape(-1):
#   vec(A @ rho @ B) = (A kron B.T) @ vec(rho)

def vec(m: np.ndarray) -> np.ndarray:
    return np.asarray(m, dtype=complex).reshape(-1)


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(v, dtype=complex).reshape(dim, dim)


def left_mult(a: np.ndarray) -> np.ndarray:
    """Superoperator matrix of rho -> a @ rho in row-major vec convention."""
    d = a.shape[0]
    return np.kron(a, np.eye(d, dtype=complex))


def right_mult(b: np.ndarray) -> np.ndarray:
    """Superoperator matrix of rho -> rho @ b in row-major vec convention."""
    d = b.shape[0]
    return np.kron(np.eye(d, dtype=complex), b.T)
