"""JIT-compiled inner loops for the saturation walks.

The per-iteration work of the walks is O(m^3) (baseline) or O(m^2)
(accelerated) on windows of at most m+1 coordinates.  Interpreted per-step
overhead would swamp those costs at desk scale, so the loops are compiled
with numba.  ``preprocess`` keeps equivalent plain-numpy implementations;
both engines satisfy the same output contract.
"""

from __future__ import annotations

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_FALLBACK = 1  # caller should finish the walk with the baseline method
STATUS_STUCK = 2     # defensive: no progress possible (should not happen)

PIVOT_RTOL = 1e-12
SAT_RTOL = 1e-12


@njit(cache=True)
def _first_free(sat, nxt, i, n):
    """Smallest unsaturated index >= i, with path compression on ``nxt``."""
    j = i
    while j < n and sat[j]:
        j = nxt[j]
    k = i
    while k < n and sat[k] and k != j:
        t = nxt[k]
        nxt[k] = j
        k = t
    return j


@njit(cache=True)
def _inverse_inplace(M, inv, tol):
    """Gauss-Jordan inverse of M (m x m) into ``inv``; False if a pivot < tol.

    M is destroyed.
    """
    m = M.shape[0]
    for i in range(m):
        for j in range(m):
            inv[i, j] = 1.0 if i == j else 0.0
    for col in range(m):
        p = col
        best = abs(M[col, col])
        for r in range(col + 1, m):
            v = abs(M[r, col])
            if v > best:
                best = v
                p = r
        if best <= tol:
            return False
        if p != col:
            for j in range(m):
                tmp = M[col, j]
                M[col, j] = M[p, j]
                M[p, j] = tmp
                tmp = inv[col, j]
                inv[col, j] = inv[p, j]
                inv[p, j] = tmp
        piv = M[col, col]
        for j in range(m):
            M[col, j] /= piv
            inv[col, j] /= piv
        for r in range(m):
            if r != col:
                f = M[r, col]
                if f != 0.0:
                    for j in range(m):
                        M[r, j] -= f * M[col, j]
                        inv[r, j] -= f * inv[col, j]
    return True


@njit(cache=True)
def _window_kernel_vector(W, tol, b):
    """Nullspace vector of the m x (m+1) window ``W``, normalized to inf-norm 1.

    Gauss-Jordan with partial pivoting; columns whose pivot candidates all
    fall below ``tol`` become free columns.  A nontrivial kernel vector always
    exists because the window has one more column than rows.  W is destroyed.
    """
    m = W.shape[0]
    nc = m + 1
    pivcol = np.full(m, -1, np.int64)
    r = 0
    for col in range(nc):
        if r == m:
            break
        p = r
        best = abs(W[r, col])
        for i in range(r + 1, m):
            v = abs(W[i, col])
            if v > best:
                best = v
                p = i
        if best <= tol:
            continue
        if p != r:
            for j in range(nc):
                tmp = W[r, j]
                W[r, j] = W[p, j]
                W[p, j] = tmp
        piv = W[r, col]
        for j in range(col, nc):
            W[r, j] /= piv
        for i in range(m):
            if i != r and W[i, col] != 0.0:
                f = W[i, col]
                for j in range(col, nc):
                    W[i, j] -= f * W[r, j]
        pivcol[r] = col
        r += 1
    is_piv = np.zeros(nc, np.bool_)
    for i in range(r):
        is_piv[pivcol[i]] = True
    free_col = -1
    for col in range(nc):
        if not is_piv[col]:
            free_col = col
            break
    # Sign convention matches the working-set construction b = (Ainv a, -1):
    # the free column carries -1, the solved block the positive coefficients.
    for j in range(nc):
        b[j] = 0.0
    b[free_col] = -1.0
    for i in range(r):
        b[pivcol[i]] = W[i, free_col]
    mx = 0.0
    for j in range(nc):
        a = abs(b[j])
        if a > mx:
            mx = a
    for j in range(nc):
        b[j] /= mx


@njit(cache=True)
def _min_positive_crossing(zw, bw, c):
    """Smallest strictly positive step at which some coordinate reaches |.|=c."""
    alpha = np.inf
    for k in range(zw.shape[0]):
        b = bw[k]
        if b == 0.0:
            continue
        t1 = (c - zw[k]) / b
        t2 = (-c - zw[k]) / b
        if t1 > 0.0 and t1 < alpha:
            alpha = t1
        if t2 > 0.0 and t2 < alpha:
            alpha = t2
    return alpha


@njit(cache=True)
def baseline_walk(A, z, sat, c):
    """Kernel walk with a fresh window factorization each iteration.

    Mutates ``z`` and ``sat`` in place; returns (iterations, status).
    """
    m, n = A.shape
    unsat = 0
    for i in range(n):
        if not sat[i]:
            unsat += 1
    iterations = 0
    nxt = np.arange(1, n + 1)
    window = np.empty(m + 1, np.int64)
    W = np.empty((m, m + 1))
    bw = np.empty(m + 1)
    zw = np.empty(m + 1)
    cth = c * (1.0 - SAT_RTOL)
    while unsat > m:
        pos = _first_free(sat, nxt, 0, n)
        for k in range(m + 1):
            window[k] = pos
            pos = _first_free(sat, nxt, pos + 1, n)
        scale = 0.0
        for i in range(m):
            for k in range(m + 1):
                v = A[i, window[k]]
                W[i, k] = v
                if abs(v) > scale:
                    scale = abs(v)
        _window_kernel_vector(W, PIVOT_RTOL * scale, bw)
        for k in range(m + 1):
            zw[k] = z[window[k]]
        alpha = _min_positive_crossing(zw, bw, c)
        if not np.isfinite(alpha):
            return iterations, STATUS_STUCK
        nsat = 0
        for k in range(m + 1):
            i = window[k]
            zi = zw[k] + alpha * bw[k]
            if abs(zi) >= cth:
                zi = c if zi > 0.0 else -c
                sat[i] = True
                nsat += 1
            z[i] = zi
        if nsat == 0:
            return iterations, STATUS_STUCK
        unsat -= nsat
        iterations += 1
    return iterations, STATUS_OK


@njit(cache=True)
def accelerated_walk(A, z, sat, c, refactor_every):
    """Kernel walk with an (m+1)-column working set and rank-one inverse updates.

    Mutates ``z`` and ``sat`` in place; returns (iterations, status).  A
    STATUS_FALLBACK return means the inverse bookkeeping hit a singular
    working block (columns not in general position); the caller finishes the
    instance with the baseline walk from the current state.
    """
    m, n = A.shape
    unsat = 0
    for i in range(n):
        if not sat[i]:
            unsat += 1
    iterations = 0
    if unsat <= m:
        return 0, STATUS_OK
    work = np.empty(m + 1, np.int64)
    j = 0
    k = 0
    while k < m + 1:
        if not sat[j]:
            work[k] = j
            k += 1
        j += 1
    qptr = j
    M = np.empty((m, m))
    inv = np.empty((m, m))
    scale = 0.0
    for i in range(m):
        for t in range(m):
            v = A[i, work[t]]
            M[i, t] = v
            if abs(v) > scale:
                scale = abs(v)
    if not _inverse_inplace(M, inv, PIVOT_RTOL * scale):
        return 0, STATUS_FALLBACK
    updates = 0
    bw = np.empty(m + 1)
    zw = np.empty(m + 1)
    u = np.empty(m)
    wvec = np.empty(m)
    rowk = np.empty(m)
    cth = c * (1.0 - SAT_RTOL)
    while unsat > m:
        extra = work[m]
        for i in range(m):
            s = 0.0
            for t in range(m):
                s += inv[i, t] * A[t, extra]
            bw[i] = s
        bw[m] = -1.0
        for k in range(m + 1):
            zw[k] = z[work[k]]
        alpha = _min_positive_crossing(zw, bw, c)
        if not np.isfinite(alpha):
            return iterations, STATUS_FALLBACK
        nsat = 0
        for k in range(m + 1):
            i = work[k]
            zi = zw[k] + alpha * bw[k]
            if abs(zi) >= cth:
                zi = c if zi > 0.0 else -c
                sat[i] = True
                nsat += 1
            z[i] = zi
        if nsat == 0:
            return iterations, STATUS_FALLBACK
        unsat -= nsat
        iterations += 1
        if unsat <= m:
            break
        for k in range(m + 1):
            if not sat[work[k]]:
                continue
            while qptr < n and sat[qptr]:
                qptr += 1
            if qptr >= n:
                # Queue exhausted implies the free set fits in the working
                # window, so the loop condition cannot hold; defensive exit.
                return iterations, STATUS_FALLBACK
            newcol = qptr
            qptr += 1
            if k == m:
                work[m] = newcol
                continue
            old = work[k]
            for i in range(m):
                u[i] = A[i, newcol] - A[i, old]
            denom = 1.0
            for t in range(m):
                denom += inv[k, t] * u[t]
            work[k] = newcol
            if abs(denom) >= PIVOT_RTOL and updates < refactor_every:
                for i in range(m):
                    s = 0.0
                    for t in range(m):
                        s += inv[i, t] * u[t]
                    wvec[i] = s
                for t in range(m):
                    rowk[t] = inv[k, t]
                for i in range(m):
                    f = wvec[i] / denom
                    for t in range(m):
                        inv[i, t] -= f * rowk[t]
                updates += 1
            else:
                scale = 0.0
                for i in range(m):
                    for t in range(m):
                        v = A[i, work[t]]
                        M[i, t] = v
                        if abs(v) > scale:
                            scale = abs(v)
                if not _inverse_inplace(M, inv, PIVOT_RTOL * scale):
                    return iterations, STATUS_FALLBACK
                updates = 0
    return iterations, STATUS_OK
