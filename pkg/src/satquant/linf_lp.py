"""Infinity-norm minimization under equality constraints, and the layer-level
tie-breaking pass that shares one cap across neurons.

``min ||z||_inf  s.t.  A z = y`` is rewritten over nonnegative variables
``x = (w_plus, w_minus, u)`` with ``w_plus = u·1 - z`` and
``w_minus = u·1 + z``:

* top rows:       ``(-A | A | 0) x = 2 y``        (the data constraints)
* coupling rows:  ``(I | I | -2·1) x = 0``        (ties the cap u to z)

and solved by a dense revised simplex with Bland's anti-cycling rule.  A
simplex vertex has at most ``rows`` nonzero variables, which is exactly what
forces ``n - m + 1`` coordinates of the recovered ``z`` to sit at the cap
when the data rows are in general position; interior-point iterates would
blur that count, which is why this module pivots instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    DegenerateTieBreaker,
    DimensionMismatch,
    Infeasible,
    IterationLimit,
    Unbounded,
)
from .linalg import as_matrix, as_vector
from .seeding import derive_rng

# Entries within this relative distance of the cap are clamped onto it.
CAP_RTOL = 1e-10

_REFACTOR_EVERY = 128


@dataclass(frozen=True)
class StandardFormLP:
    """``min cost·x  s.t.  constraints·x = rhs, x >= 0``.

    ``n`` is the dimension of the original (free) variable the program was
    built from; recovery helpers use it to slice the sign-split blocks.
    """

    constraints: np.ndarray
    rhs: np.ndarray
    cost: np.ndarray
    n: int


@dataclass(frozen=True)
class LPSolution:
    x: np.ndarray
    objective: float
    iterations: int


@dataclass(frozen=True)
class LinfSolution:
    """Minimizer of the inf-norm (or of the tie-break program) for one neuron."""

    z_star: np.ndarray
    value: float
    saturated_count: int
    iterations: int


def build_linf_lp(A, y) -> StandardFormLP:
    """Standard form of ``min ||z||_inf  s.t.  A z = y``."""
    A = as_matrix(A, "A")
    y = as_vector(y, "y")
    m, n = A.shape
    if y.shape[0] != m:
        raise DimensionMismatch(f"rhs has dim {y.shape[0]}, expected {m}")
    top = np.hstack([-A, A, np.zeros((m, 1))])
    coupling = np.hstack([np.eye(n), np.eye(n), -2.0 * np.ones((n, 1))])
    cost = np.zeros(2 * n + 1)
    cost[2 * n] = 1.0
    return StandardFormLP(
        constraints=np.vstack([top, coupling]),
        rhs=np.concatenate([2.0 * y, np.zeros(n)]),
        cost=cost,
        n=n,
    )


def build_tie_break_lp(A, y, cap: float, a) -> StandardFormLP:
    """Standard form of ``min a·z  s.t.  A z = y, ||z||_inf <= cap``.

    Variables ``(s_plus, s_minus) >= 0`` with ``s_plus = cap·1 - z`` and
    ``s_minus = cap·1 + z``, so ``s_plus + s_minus = 2·cap·1``.
    """
    A = as_matrix(A, "A")
    y = as_vector(y, "y")
    a = as_vector(a, "a")
    m, n = A.shape
    if y.shape[0] != m or a.shape[0] != n:
        raise DimensionMismatch("tie-break LP shapes are inconsistent")
    top = np.hstack([-A, A])
    coupling = np.hstack([np.eye(n), np.eye(n)])
    cost = np.concatenate([-a / 2.0, a / 2.0])
    return StandardFormLP(
        constraints=np.vstack([top, coupling]),
        rhs=np.concatenate([2.0 * y, np.full(n, 2.0 * cap)]),
        cost=cost,
        n=n,
    )


def recover_z(lp: StandardFormLP, x: np.ndarray) -> np.ndarray:
    """Map a standard-form solution back to the original variable z."""
    n = lp.n
    return (x[n : 2 * n] - x[:n]) / 2.0


def _refactorize(A, basis, b):
    B = A[:, basis]
    lu, piv = scipy.linalg.lu_factor(B, check_finite=False)
    binv = scipy.linalg.lu_solve((lu, piv), np.eye(B.shape[0]), check_finite=False)
    xb = binv @ b
    return binv, np.maximum(xb, 0.0)


def _primal_simplex(A, b, c, basis, binv, xb, n_enter, maxiter):
    """Bland's-rule primal iterations on an explicit basis inverse.

    Only columns below ``n_enter`` may enter (artificials stay out in phase 2).
    Mutates ``basis``, returns (binv, xb, iterations).
    """
    M = A.shape[0]
    cost_scale = max(1.0, float(np.max(np.abs(c))))
    d_tol = 1e-10 * cost_scale
    it = 0
    in_basis = np.zeros(A.shape[1], dtype=bool)
    in_basis[basis] = True
    while it < maxiter:
        y = c[basis] @ binv
        reduced = c[:n_enter] - y @ A[:, :n_enter]
        cands = np.flatnonzero((reduced < -d_tol) & ~in_basis[:n_enter])
        if cands.size == 0:
            return binv, xb, it
        j = int(cands[0])  # Bland: smallest eligible index
        u = binv @ A[:, j]
        pos = np.flatnonzero(u > 1e-11)
        if pos.size == 0:
            raise Unbounded("improving direction is unbounded")
        ratios = xb[pos] / u[pos]
        theta = float(np.min(ratios))
        ties = pos[ratios <= theta + 1e-10 * (1.0 + abs(theta))]
        leave = int(ties[np.argmin(basis[ties])])  # Bland on the leaving side
        piv = u[leave]
        theta = xb[leave] / piv
        xb = xb - theta * u
        xb[leave] = theta
        np.maximum(xb, 0.0, out=xb)
        binv[leave, :] /= piv
        others = np.arange(M) != leave
        binv[others, :] -= np.outer(u[others], binv[leave, :])
        in_basis[basis[leave]] = False
        in_basis[j] = True
        basis[leave] = j
        it += 1
        if it % _REFACTOR_EVERY == 0:
            try:
                binv, xb = _refactorize(A, basis, b)
            except Exception:
                pass  # keep the running inverse; next refactor may succeed
    raise IterationLimit(f"simplex exceeded {maxiter} iterations")


def lp_solve_standard_form(lp: StandardFormLP, maxiter: int | None = None) -> LPSolution:
    """Two-phase revised simplex; returns a vertex-optimal solution.

    Raises :class:`Infeasible` when phase 1 cannot zero the artificials
    (impossible for the programs built here unless numerics break down) and
    :class:`IterationLimit` if pivoting stalls.
    """
    A = as_matrix(lp.constraints, "constraints")
    b = as_vector(lp.rhs, "rhs")
    c = as_vector(lp.cost, "cost")
    M, N = A.shape
    if b.shape[0] != M or c.shape[0] != N:
        raise DimensionMismatch("LP shapes are inconsistent")
    if maxiter is None:
        maxiter = 50 * (M + N) + 1000

    flip = np.where(b < 0.0, -1.0, 1.0)
    A1 = np.hstack([A * flip[:, None], np.eye(M)])
    b1 = b * flip
    basis = np.arange(N, N + M)
    binv = np.eye(M)
    xb = b1.copy()

    c1 = np.concatenate([np.zeros(N), np.ones(M)])
    binv, xb, it1 = _primal_simplex(A1, b1, c1, basis, binv, xb, N + M, maxiter)
    art_value = float(np.sum(xb[basis >= N]))
    if art_value > 1e-8 * (1.0 + np.linalg.norm(b)):
        raise Infeasible(f"phase-1 objective {art_value:.3e}")

    # Drive basic artificials out where possible; redundant rows keep their
    # artificial basic at value zero and are harmless afterwards.
    for i in np.flatnonzero(basis >= N):
        row = binv[i, :] @ A1[:, :N]
        pivots = np.flatnonzero(np.abs(row) > 1e-9)
        in_basis = np.isin(np.arange(N), basis)
        pivots = [j for j in pivots if not in_basis[j]]
        if not pivots:
            continue
        j = int(pivots[0])
        u = binv @ A1[:, j]
        piv = u[i]
        xb = xb - (xb[i] / piv) * u
        xb[i] = max(xb[i] / piv, 0.0) if piv != 0 else 0.0
        np.maximum(xb, 0.0, out=xb)
        binv[i, :] /= piv
        others = np.arange(M) != i
        binv[others, :] -= np.outer(u[others], binv[i, :])
        basis[i] = j

    c2 = np.concatenate([c, np.zeros(M)])
    binv, xb, it2 = _primal_simplex(A1, b1, c2, basis, binv, xb, N, maxiter)

    try:
        binv, xb = _refactorize(A1, basis, b1)
    except Exception:
        pass
    x = np.zeros(N)
    keep = basis < N
    x[basis[keep]] = xb[keep]
    return LPSolution(x=x, objective=float(c @ x), iterations=int(it1 + it2))


def _clamp_to_cap(z: np.ndarray, cap: float) -> tuple[np.ndarray, int]:
    """Snap entries within the cap tolerance onto ±cap; count them."""
    z = z.copy()
    if cap > 0.0:
        at = np.abs(z) >= cap * (1.0 - CAP_RTOL)
        z[at] = np.copysign(cap, z[at])
    else:
        at = np.ones(z.shape[0], dtype=bool)
    return z, int(np.count_nonzero(at))


def linf_minimize(Xt, w) -> LinfSolution:
    """Minimize ``||z||_inf`` subject to ``Xt z = Xt w``.

    The minimizer matches the action of ``w`` on the data with the smallest
    possible cap; for data rows in general position at least ``n - m + 1``
    of its coordinates sit at that cap (a vertex-solution effect).
    """
    Xt = as_matrix(Xt, "Xt")
    w = as_vector(w, "w")
    m, n = Xt.shape
    if w.shape[0] != n:
        raise DimensionMismatch(f"w has dim {w.shape[0]}, expected {n}")
    if n <= m:
        raise DimensionMismatch(f"need more columns than rows, got {m}x{n}")
    lp = build_linf_lp(Xt, Xt @ w)
    sol = lp_solve_standard_form(lp)
    z = recover_z(lp, sol.x)
    value = float(np.max(np.abs(z)))
    z, count = _clamp_to_cap(z, value)
    return LinfSolution(z, value, count, sol.iterations)


def tie_break_minimize(Xt, w, cap: float, a) -> LinfSolution:
    """Program that pins a neuron to a shared cap: ``min a·z`` over the
    feasible set ``Xt z = Xt w``, ``||z||_inf <= cap``."""
    Xt = as_matrix(Xt, "Xt")
    w = as_vector(w, "w")
    lp = build_tie_break_lp(Xt, Xt @ w, cap, a)
    sol = lp_solve_standard_form(lp)
    z = recover_z(lp, sol.x)
    z, count = _clamp_to_cap(z, cap)
    return LinfSolution(z, float(np.max(np.abs(z))), count, sol.iterations)


def layer_linf_preprocess(Xt, W, seed: int = 0, max_redraws: int = 8):
    """Two-stage inf-norm pre-processing of a whole layer.

    Stage 1 minimizes each neuron's inf-norm to find the shared cap
    ``c_hat`` (the largest per-neuron optimum).  Stage 2 re-solves each
    neuron with a random linear objective over the cap-constrained feasible
    set, which forces every returned column to saturate at least ``n - m``
    coordinates at ``±c_hat`` while still matching the data.  Tie-break
    directions that fail to reach that count (a general-position failure)
    are redrawn up to ``max_redraws`` times.

    Returns ``(c_hat, W_hat, solutions)``.
    """
    Xt = as_matrix(Xt, "Xt")
    W = as_matrix(W, "W")
    m, n = Xt.shape
    if W.shape[0] != n:
        raise DimensionMismatch(f"W has {W.shape[0]} rows, expected {n}")
    if n <= m:
        raise DimensionMismatch(f"need more weights than data points, got {m}x{n}")
    n1 = W.shape[1]
    stage1 = [linf_minimize(Xt, W[:, i]) for i in range(n1)]
    c_hat = max(s.value for s in stage1)
    if c_hat == 0.0:
        # every neuron acts as zero on the data; nothing to tie-break
        zero = np.zeros_like(W)
        sols = [LinfSolution(zero[:, i], 0.0, n, s.iterations) for i, s in enumerate(stage1)]
        return 0.0, zero, sols
    w_hat = np.empty_like(W)
    solutions: list[LinfSolution] = []
    for i in range(n1):
        sol = None
        for attempt in range(max_redraws):
            a = derive_rng(seed, i, attempt).standard_normal(n)
            cand = tie_break_minimize(Xt, W[:, i], c_hat, a)
            if cand.value == c_hat and cand.saturated_count >= n - m:
                sol = cand
                break
        if sol is None:
            raise DegenerateTieBreaker(
                f"neuron {i}: no tie-break direction reached {n - m} saturated "
                f"entries in {max_redraws} draws"
            )
        w_hat[:, i] = sol.z_star
        solutions.append(sol)
    return float(c_hat), w_hat, solutions
