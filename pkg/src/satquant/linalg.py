"""Dense linear algebra primitives used by every other module.

Matrices and vectors are plain float64 numpy arrays.  ``as_matrix`` and
``as_vector`` are the validation choke points: everything that enters the
package from outside goes through them so that downstream code can assume
finite float64 data.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg

from .errors import DegenerateUpdate, DimensionMismatch, SingularMatrix

# Pivots (and Sherman-Morrison denominators) below this relative threshold
# are treated as exact zeros: the inputs are then not in general position.
PIVOT_RTOL = 1e-12


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array and require finite entries."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    return m


def as_vector(a, name: str = "vector") -> np.ndarray:
    """Coerce to a 1-D float64 array and require finite entries."""
    v = np.asarray(a, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionMismatch(f"{name} must be 1-D, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v


def solve_square(A, y) -> np.ndarray:
    """Solve ``A x = y`` for square ``A`` by partial-pivot LU.

    Raises :class:`SingularMatrix` when any pivot magnitude drops below
    ``PIVOT_RTOL * max|A|``, i.e. when the system is numerically singular.
    """
    A = as_matrix(A, "A")
    y = as_vector(y, "y")
    n, k = A.shape
    if n != k:
        raise DimensionMismatch(f"A must be square, got {A.shape}")
    if y.shape[0] != n:
        raise DimensionMismatch(f"y has dim {y.shape[0]}, expected {n}")
    scale = np.max(np.abs(A)) if A.size else 0.0
    if scale == 0.0:
        raise SingularMatrix("zero matrix")
    with warnings.catch_warnings():
        # the pivot check below raises SingularMatrix; scipy's warning is noise
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if np.min(pivots) < PIVOT_RTOL * scale:
        raise SingularMatrix(
            f"pivot {np.min(pivots):.3e} below tolerance {PIVOT_RTOL * scale:.3e}"
        )
    return scipy.linalg.lu_solve((lu, piv), y, check_finite=False)


def rank1_inverse_update(Ainv, u, j: int) -> np.ndarray:
    """Inverse of ``A + u e_j^T`` given ``Ainv = A^{-1}`` (Sherman-Morrison).

    ``j`` is the 0-based index of the updated column.  Raises
    :class:`DegenerateUpdate` when ``1 + e_j^T Ainv u`` is numerically zero,
    which signals that the updated matrix is (close to) singular; callers are
    expected to fall back to a fresh factorization.
    """
    Ainv = as_matrix(Ainv, "Ainv")
    u = as_vector(u, "u")
    n = Ainv.shape[0]
    if Ainv.shape[1] != n:
        raise DimensionMismatch(f"Ainv must be square, got {Ainv.shape}")
    if u.shape[0] != n:
        raise DimensionMismatch(f"u has dim {u.shape[0]}, expected {n}")
    if not 0 <= j < n:
        raise DimensionMismatch(f"column index {j} out of range [0, {n})")
    w = Ainv @ u
    denom = 1.0 + w[j]
    if abs(denom) < PIVOT_RTOL:
        raise DegenerateUpdate(f"Sherman-Morrison denominator {denom:.3e}")
    return Ainv - np.outer(w, Ainv[j, :]) / denom


def spectral_norm_estimate(A, iterations: int = 200, seed: int = 0) -> float:
    """Largest singular value of ``A``, by power iteration on ``A^T A``.

    The returned value never exceeds the true spectral norm (it is a Rayleigh
    quotient), and converges to it geometrically whenever the top singular
    value is separated from the second.  The starting vector is drawn from a
    seeded generator so results are reproducible.
    """
    A = as_matrix(A, "A")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if A.size == 0 or not np.any(A):
        return 0.0
    rng = np.random.default_rng(seed)
    n = A.shape[1]
    v = rng.standard_normal(n)
    for _ in range(4):  # restart if the start vector lies in the nullspace
        nv = np.linalg.norm(v)
        if nv > 0:
            v /= nv
            w = A @ v
            if np.linalg.norm(w) > 0:
                break
        v = rng.standard_normal(n)
    else:
        return 0.0
    for _ in range(iterations):
        v = A.T @ (A @ v)
        nv = np.linalg.norm(v)
        if nv == 0.0:
            return 0.0
        v /= nv
    return float(np.linalg.norm(A @ v))
