"""Saturating pre-processing of neurons.

Given data rows ``A0`` (m x n, n > m), a weight vector ``w``, and a cap
``c >= max|w_i|``, the walk replaces ``w`` by a vector with the same action
on the data (``A0 w_hat = A0 w``), with max magnitude exactly ``c``, and with
all but at most ``m`` coordinates sitting at ``±c``.  Those saturated
coordinates then quantize with zero error under any alphabet whose extreme
elements are ``±c``.

Each iteration moves along a nullspace direction of the data matrix that is
supported on the still-unsaturated coordinates, stepping exactly far enough
for one more coordinate to reach the cap.  Two variants are provided:

* ``preprocess_baseline`` factorizes a fresh (m+1)-column window every
  iteration and tolerates arbitrary data.
* ``preprocess_accelerated`` keeps a running inverse of an m-column working
  block and applies rank-one updates as saturated columns are swapped out;
  it assumes columns in general position and falls back to the baseline walk
  when that fails.

Both engines ("fast" = compiled loops, "numpy" = reference implementation)
satisfy the identical output contract, checked by
:func:`verify_preprocess_contract`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    CapTooSmall,
    DegenerateUpdate,
    DimensionMismatch,
    NoCrossing,
    NoKernelVector,
    SingularMatrix,
)
from .linalg import PIVOT_RTOL, as_matrix, as_vector, rank1_inverse_update, solve_square

try:
    from . import _walk_fast as _fast
except ImportError:  # pragma: no cover - numba is a declared dependency
    _fast = None

# An entry counts as saturated when within this relative distance of the cap;
# it is then clamped to ±c exactly.
SAT_RTOL = 1e-12

# Relative data-consistency tolerance of the output contract.
DATA_RTOL = 1e-8

# The accelerated walk refactorizes from scratch after this many rank-one
# updates to stop error accumulation.
REFACTOR_EVERY = 64

BASELINE = "baseline"
ACCELERATED = "accelerated"
LINF = "linf"


@dataclass(frozen=True)
class PreprocessResult:
    """Pre-processed neuron with saturation bookkeeping.

    ``saturated`` holds the indices clamped to ``±c``; ``data_residual`` is
    ``||A0 w_hat - A0 w||_2``.
    """

    w_hat: np.ndarray
    saturated: np.ndarray
    iterations: int
    data_residual: float
    method: str

    @property
    def saturated_count(self) -> int:
        return int(self.saturated.shape[0])

    def unsaturated_count(self) -> int:
        return int(self.w_hat.shape[0] - self.saturated.shape[0])


@dataclass(frozen=True)
class KernelStep:
    """One walk step: direction, step length, and the coordinates it saturates."""

    direction: np.ndarray
    alpha: float
    newly_saturated: np.ndarray


@dataclass(frozen=True)
class ContractReport:
    """Pass/fail record for the three output-contract clauses."""

    data_ok: bool
    cap_ok: bool
    sparsity_ok: bool
    data_residual: float
    data_tolerance: float
    max_abs: float
    cap: float
    unsaturated_count: int
    budget: int

    @property
    def passed(self) -> bool:
        return self.data_ok and self.cap_ok and self.sparsity_ok


def _window_kernel_vector_numpy(W: np.ndarray) -> np.ndarray:
    """Nullspace vector of an m x (m+1) window via Gauss-Jordan elimination.

    Mirrors the compiled kernel: columns without a usable pivot become free
    columns, and the kernel vector is read off the reduced system.  Returned
    vector is normalized to inf-norm 1.
    """
    W = W.copy()
    m, nc = W.shape
    scale = np.max(np.abs(W)) if W.size else 0.0
    tol = PIVOT_RTOL * scale
    pivcols: list[int] = []
    r = 0
    for col in range(nc):
        if r == m:
            break
        p = r + int(np.argmax(np.abs(W[r:, col])))
        if abs(W[p, col]) <= tol:
            continue
        if p != r:
            W[[r, p]] = W[[p, r]]
        W[r, col:] /= W[r, col]
        factors = W[:, col].copy()
        factors[r] = 0.0
        W[:, col:] -= np.outer(factors, W[r, col:])
        pivcols.append(col)
        r += 1
    free_col = next(c for c in range(nc) if c not in pivcols)
    # Sign convention matches the working-set construction b = (Ainv a, -1):
    # the free column carries -1, the solved block the positive coefficients.
    b = np.zeros(nc)
    b[free_col] = -1.0
    for row, col in enumerate(pivcols):
        b[col] = W[row, free_col]
    return b / np.max(np.abs(b))


def restricted_kernel_vector(A0, free) -> np.ndarray:
    """Nonzero ``b`` with ``A0 b = 0`` supported on the ``free`` index set.

    Works on the window of the first m+1 free columns; falls back to an SVD
    nullspace over all free columns if the window result is numerically bad.
    The result is normalized to inf-norm 1.
    """
    A0 = as_matrix(A0, "A0")
    m, n = A0.shape
    free = np.unique(np.asarray(free, dtype=np.intp))
    if free.size < m + 1:
        raise NoKernelVector(
            f"need at least m+1={m + 1} free columns, got {free.size}"
        )
    if free.size and (free[0] < 0 or free[-1] >= n):
        raise DimensionMismatch("free indices out of range")
    norm_a = np.linalg.norm(A0)

    def _accept(cols, bloc):
        resid = np.linalg.norm(A0[:, cols] @ bloc)
        return resid <= 1e-10 * max(norm_a, 1e-300) * np.linalg.norm(bloc)

    window = free[: m + 1]
    b_win = _window_kernel_vector_numpy(A0[:, window])
    if _accept(window, b_win):
        b = np.zeros(n)
        b[window] = b_win
        return b
    # Ill-conditioned window: widen to the whole free set and use an SVD
    # nullspace, which is as accurate as the data allows.
    sub = A0[:, free]
    _, _, vt = np.linalg.svd(sub)
    b_free = vt[-1]
    b_free = b_free / np.max(np.abs(b_free))
    if not _accept(free, b_free):
        raise NoKernelVector("no numerically reliable kernel direction found")
    b = np.zeros(n)
    b[free] = b_free
    return b


def saturation_step(z, b, c: float, saturated) -> KernelStep:
    """Smallest positive step along ``b`` that saturates a new coordinate.

    ``saturated`` may be a boolean mask or an index set.  The returned step
    satisfies ``max|z + alpha*b| = c`` with no coordinate exceeding the cap,
    and ``newly_saturated`` lists the free coordinates that reach it.
    """
    z = as_vector(z, "z")
    b = as_vector(b, "b")
    if z.shape != b.shape:
        raise DimensionMismatch("z and b must have the same dimension")
    n = z.shape[0]
    sat = np.zeros(n, dtype=bool)
    saturated = np.asarray(saturated)
    if saturated.dtype == bool:
        sat[:] = saturated
    elif saturated.size:
        sat[saturated.astype(np.intp)] = True
    active = ~sat & (b != 0.0)
    if not np.any(active):
        raise NoCrossing("direction vanishes on every free coordinate")
    with np.errstate(divide="ignore", invalid="ignore"):
        t_hi = (c - z[active]) / b[active]
        t_lo = (-c - z[active]) / b[active]
    cands = np.concatenate([t_hi, t_lo])
    cands = cands[cands > 0.0]
    if cands.size == 0:
        raise NoCrossing("no strictly positive crossing exists")
    alpha = float(np.min(cands))
    z_new = z + alpha * b
    newly = np.flatnonzero(~sat & (np.abs(z_new) >= c * (1.0 - SAT_RTOL)))
    return KernelStep(direction=b, alpha=alpha, newly_saturated=newly)


def _validate_inputs(A0, w, c):
    A0 = np.ascontiguousarray(as_matrix(A0, "A0"))
    w = as_vector(w, "w")
    m, n = A0.shape
    if w.shape[0] != n:
        raise DimensionMismatch(f"w has dim {w.shape[0]}, expected {n}")
    if n <= m:
        raise DimensionMismatch(f"need more columns than rows, got {m}x{n}")
    c = float(c)
    winf = float(np.max(np.abs(w))) if n else 0.0
    if c < winf:
        raise CapTooSmall(f"cap {c} < max|w| = {winf}")
    if not c > 0:
        raise CapTooSmall("cap must be positive")
    return A0, w, c


def _init_state(A0, w, c):
    """Zero-column initialization and pre-saturation marking.

    Entries on zero columns of A0 are pushed to exactly +c (the walk's init
    step adds ``c - z_i`` there, a kernel direction of A0).  Entries already
    within tolerance of the cap are clamped and marked saturated.
    """
    z = w.copy()
    zero_cols = np.flatnonzero(~A0.any(axis=0))
    z[zero_cols] = c
    sat = np.zeros(z.shape[0], dtype=bool)
    sat[zero_cols] = True
    at_cap = np.abs(z) >= c * (1.0 - SAT_RTOL)
    z[at_cap] = np.copysign(c, z[at_cap])
    sat |= at_cap
    return z, sat


def _walk_baseline_numpy(A0, z, sat, c):
    m, n = A0.shape
    unsat = int(n - sat.sum())
    iterations = 0
    cth = c * (1.0 - SAT_RTOL)
    while unsat > m:
        window = np.flatnonzero(~sat)[: m + 1]
        bw = _window_kernel_vector_numpy(A0[:, window])
        zw = z[window]
        alpha = _min_positive_crossing_numpy(zw, bw, c)
        if not np.isfinite(alpha):
            raise NoKernelVector("walk made no progress")
        zw = zw + alpha * bw
        hit = np.abs(zw) >= cth
        if not hit.any():
            raise NoKernelVector("walk made no progress")
        zw[hit] = np.copysign(c, zw[hit])
        z[window] = zw
        sat[window[hit]] = True
        unsat -= int(hit.sum())
        iterations += 1
    return iterations


def _min_positive_crossing_numpy(zw, bw, c):
    nz = bw != 0.0
    if not nz.any():
        return np.inf
    with np.errstate(divide="ignore", invalid="ignore"):
        cands = np.concatenate([(c - zw[nz]) / bw[nz], (-c - zw[nz]) / bw[nz]])
    cands = cands[cands > 0.0]
    return float(np.min(cands)) if cands.size else np.inf


def _fresh_inverse(A0, cols):
    """LU inverse of the m-column working block, with the pivot tolerance of
    :func:`solve_square`."""
    block = A0[:, cols]
    scale = np.max(np.abs(block)) if block.size else 0.0
    if scale == 0.0:
        raise SingularMatrix("zero working block")
    lu, piv = scipy.linalg.lu_factor(block, check_finite=False)
    if np.min(np.abs(np.diag(lu))) < PIVOT_RTOL * scale:
        raise SingularMatrix("singular working block")
    return scipy.linalg.lu_solve((lu, piv), np.eye(len(cols)), check_finite=False)


def _walk_accelerated_numpy(A0, z, sat, c):
    """Reference implementation of the working-set walk.

    Returns (iterations, fell_back).  ``fell_back`` means the caller must
    finish the instance with the baseline walk.
    """
    m, n = A0.shape
    unsat = int(n - sat.sum())
    if unsat <= m:
        return 0, False
    free_idx = np.flatnonzero(~sat)
    work = list(free_idx[: m + 1])
    queue = iter(free_idx[m + 1 :])
    try:
        inv = _fresh_inverse(A0, work[:m])
    except SingularMatrix:
        return 0, True
    updates = 0
    iterations = 0
    cth = c * (1.0 - SAT_RTOL)
    while unsat > m:
        widx = np.asarray(work)
        btil = inv @ A0[:, work[m]]
        bw = np.append(btil, -1.0)
        zw = z[widx]
        alpha = _min_positive_crossing_numpy(zw, bw, c)
        if not np.isfinite(alpha):
            return iterations, True
        zw = zw + alpha * bw
        hit = np.abs(zw) >= cth
        if not hit.any():
            return iterations, True
        zw[hit] = np.copysign(c, zw[hit])
        z[widx] = zw
        sat[widx[hit]] = True
        unsat -= int(hit.sum())
        iterations += 1
        if unsat <= m:
            break
        for slot in np.flatnonzero(hit):
            newcol = next(queue, None)
            while newcol is not None and sat[newcol]:
                newcol = next(queue, None)
            if newcol is None:
                return iterations, True  # defensive: queue exhausted early
            if slot == m:
                work[m] = newcol
                continue
            u = A0[:, newcol] - A0[:, work[slot]]
            work[slot] = newcol
            need_fresh = updates >= REFACTOR_EVERY
            if not need_fresh:
                try:
                    inv = rank1_inverse_update(inv, u, int(slot))
                    updates += 1
                except DegenerateUpdate:
                    need_fresh = True
            if need_fresh:
                try:
                    inv = _fresh_inverse(A0, work[:m])
                    updates = 0
                except SingularMatrix:
                    return iterations, True
    return iterations, False


def _resolve_engine(engine: str) -> str:
    if engine == "auto":
        return "fast" if _fast is not None else "numpy"
    if engine == "fast" and _fast is None:
        raise RuntimeError("compiled engine unavailable (numba not importable)")
    if engine not in ("fast", "numpy"):
        raise ValueError(f"unknown engine {engine!r}")
    return engine


def preprocess_baseline(A0, w, c, engine: str = "auto") -> PreprocessResult:
    """Saturate all but at most m coordinates, fresh factorization per step."""
    A0, w, c = _validate_inputs(A0, w, c)
    z, sat = _init_state(A0, w, c)
    if _resolve_engine(engine) == "fast":
        iterations, status = _fast.baseline_walk(A0, z, sat, c)
        if status != _fast.STATUS_OK:
            raise NoKernelVector("walk made no progress")
    else:
        iterations = _walk_baseline_numpy(A0, z, sat, c)
    residual = float(np.linalg.norm(A0 @ z - A0 @ w))
    return PreprocessResult(z, np.flatnonzero(sat), int(iterations), residual, BASELINE)


def preprocess_accelerated(A0, w, c, engine: str = "auto") -> PreprocessResult:
    """Saturate all but at most m coordinates using rank-one inverse updates.

    Assumes columns in general position but detects violations dynamically:
    a degenerate update triggers a fresh factorization, and a singular
    working block hands the remaining walk to the baseline method.  The
    output contract is identical to :func:`preprocess_baseline`.
    """
    A0, w, c = _validate_inputs(A0, w, c)
    z, sat = _init_state(A0, w, c)
    eng = _resolve_engine(engine)
    if eng == "fast":
        iterations, status = _fast.accelerated_walk(A0, z, sat, c, REFACTOR_EVERY)
        if status == _fast.STATUS_FALLBACK:
            extra, st2 = _fast.baseline_walk(A0, z, sat, c)
            if st2 != _fast.STATUS_OK:
                raise NoKernelVector("walk made no progress")
            iterations += extra
    else:
        iterations, fell_back = _walk_accelerated_numpy(A0, z, sat, c)
        if fell_back:
            iterations += _walk_baseline_numpy(A0, z, sat, c)
    residual = float(np.linalg.norm(A0 @ z - A0 @ w))
    if residual > DATA_RTOL * (1.0 + np.linalg.norm(A0 @ w)):
        # Accumulated inverse drift beyond the contract: redo the instance
        # with the baseline walk, which factorizes fresh every step.
        result = preprocess_baseline(A0, w, c, engine=engine)
        return PreprocessResult(
            result.w_hat, result.saturated, result.iterations,
            result.data_residual, ACCELERATED,
        )
    return PreprocessResult(
        z, np.flatnonzero(sat), int(iterations), residual, ACCELERATED
    )


def verify_preprocess_contract(A0, w, result: PreprocessResult, c, m) -> ContractReport:
    """Check the three output-contract clauses; reports, never raises.

    Clauses: data consistency (``||A0 w_hat - A0 w|| <= 1e-8 (1 + ||A0 w||)``),
    cap attainment (``max|w_hat| == c`` bit-exactly after clamping), and
    sparsity (at most ``m`` coordinates strictly inside the cap).
    """
    A0 = as_matrix(A0, "A0")
    w = as_vector(w, "w")
    w_hat = as_vector(result.w_hat, "w_hat")
    c = float(c)
    ref = A0 @ w
    residual = float(np.linalg.norm(A0 @ w_hat - ref))
    tolerance = DATA_RTOL * (1.0 + float(np.linalg.norm(ref)))
    max_abs = float(np.max(np.abs(w_hat)))
    unsat = int(np.count_nonzero(np.abs(w_hat) < c))
    return ContractReport(
        data_ok=residual <= tolerance,
        cap_ok=max_abs == c,
        sparsity_ok=unsat <= int(m),
        data_residual=residual,
        data_tolerance=tolerance,
        max_abs=max_abs,
        cap=c,
        unsaturated_count=unsat,
        budget=int(m),
    )
