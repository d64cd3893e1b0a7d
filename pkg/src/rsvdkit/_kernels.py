"""Compiled inner loops.

Everything here works on C-contiguous float64 arrays and is called through
the wrappers in :mod:`rsvdkit.dense` and :mod:`rsvdkit.sampling`, which do
the shape checking. Arguments are never validated at this level.
"""

import math

import numpy as np
from numba import njit, prange

# pairwise summation leaf length; leaves use 8 interleaved accumulators
PAIRWISE_LEAF = 128


@njit(cache=True)
def _dot_leaf(x, y, lo, hi):
    s0 = s1 = s2 = s3 = s4 = s5 = s6 = s7 = 0.0
    i = lo
    while i + 8 <= hi:
        s0 += x[i] * y[i]
        s1 += x[i + 1] * y[i + 1]
        s2 += x[i + 2] * y[i + 2]
        s3 += x[i + 3] * y[i + 3]
        s4 += x[i + 4] * y[i + 4]
        s5 += x[i + 5] * y[i + 5]
        s6 += x[i + 6] * y[i + 6]
        s7 += x[i + 7] * y[i + 7]
        i += 8
    r = ((s0 + s1) + (s2 + s3)) + ((s4 + s5) + (s6 + s7))
    while i < hi:
        r += x[i] * y[i]
        i += 1
    return r


# scratch depth for the pairwise cascade; enough for 2**64 leaves
PAIRWISE_STACK = 64


@njit(cache=True)
def pairwise_dot(x, y, lo, hi, stack):
    """Sum of x[i]*y[i] over [lo, hi) with pairwise summation.

    Leaves of PAIRWISE_LEAF terms are merged by a binary-counter cascade,
    which builds the balanced summation tree without recursion (numba's
    on-disk cache does not handle self-recursive functions). ``stack`` is
    caller-provided scratch of length PAIRWISE_STACK.
    """
    if hi - lo <= PAIRWISE_LEAF:
        return _dot_leaf(x, y, lo, hi)
    top = 0
    count = 0
    start = lo
    while start < hi:
        stop = min(start + PAIRWISE_LEAF, hi)
        s = _dot_leaf(x, y, start, stop)
        count += 1
        c = count
        while c & 1 == 0:
            top -= 1
            s = stack[top] + s
            c >>= 1
        stack[top] = s
        top += 1
        start = stop
    total = stack[top - 1]
    for t in range(top - 2, -1, -1):
        total = stack[t] + total
    return total


@njit(cache=True)
def sum_of_squares(x):
    return pairwise_dot(x, x, 0, x.shape[0], np.empty(PAIRWISE_STACK))


# --------------------------------------------------------------------------
# GEMM: c += a @ bt.T, both operands packed so that the reduction index is
# the contiguous one. Each output row block is owned by exactly one caller,
# so the serial and parallel drivers produce bit-identical results.


@njit(cache=True)
def _gemm_row_block(a, bt, c, i0, i1, bs, kc):
    n = bt.shape[0]
    depth = a.shape[1]
    for j0 in range(0, n, bs):
        j1 = min(j0 + bs, n)
        for p0 in range(0, depth, kc):
            p1 = min(p0 + kc, depth)
            i = i0
            while i < i1:
                i_2 = i + 1 if i + 1 < i1 else i
                a0 = a[i]
                a1 = a[i_2]
                j = j0
                while j < j1:
                    j_2 = j + 1 if j + 1 < j1 else j
                    b0 = bt[j]
                    b1 = bt[j_2]
                    s00 = 0.0
                    s01 = 0.0
                    s10 = 0.0
                    s11 = 0.0
                    for p in range(p0, p1):
                        x0 = a0[p]
                        x1 = a1[p]
                        y0 = b0[p]
                        y1 = b1[p]
                        s00 += x0 * y0
                        s01 += x0 * y1
                        s10 += x1 * y0
                        s11 += x1 * y1
                    c[i, j] += s00
                    if j_2 != j:
                        c[i, j_2] += s01
                    if i_2 != i:
                        c[i_2, j] += s10
                        if j_2 != j:
                            c[i_2, j_2] += s11
                    j += 2
                i += 2


@njit(cache=True)
def gemm_serial(a, bt, c, bs, kc):
    m = a.shape[0]
    for i0 in range(0, m, bs):
        _gemm_row_block(a, bt, c, i0, min(i0 + bs, m), bs, kc)


@njit(cache=True, parallel=True)
def gemm_parallel(a, bt, c, bs, kc):
    m = a.shape[0]
    nblocks = (m + bs - 1) // bs
    for blk in prange(nblocks):
        i0 = blk * bs
        _gemm_row_block(a, bt, c, i0, min(i0 + bs, m), bs, kc)


# --------------------------------------------------------------------------
# Householder QR (unblocked). Reflector j is stored below the diagonal of
# column j with an implicit unit leading entry, LAPACK style.


@njit(cache=True)
def householder_factor(w):
    m, n = w.shape
    tau = np.zeros(n)
    tmp = np.empty(n)
    col = np.empty(m)
    stack = np.empty(PAIRWISE_STACK)
    for j in range(n):
        tail = m - j - 1
        for i in range(tail):
            col[i] = w[j + 1 + i, j]
        sigma = pairwise_dot(col, col, 0, tail, stack)
        x0 = w[j, j]
        if sigma == 0.0:
            # already a multiple of e1: no reflection
            continue
        norm = math.sqrt(x0 * x0 + sigma)
        beta = -norm if x0 >= 0.0 else norm
        v0 = x0 - beta
        for i in range(j + 1, m):
            w[i, j] /= v0
        t = (beta - x0) / beta
        tau[j] = t
        w[j, j] = beta
        nc = n - j - 1
        if nc == 0:
            continue
        for c in range(nc):
            tmp[c] = w[j, j + 1 + c]
        for i in range(j + 1, m):
            vi = w[i, j]
            row = w[i]
            for c in range(nc):
                tmp[c] += vi * row[j + 1 + c]
        for c in range(nc):
            tmp[c] *= t
            w[j, j + 1 + c] -= tmp[c]
        for i in range(j + 1, m):
            vi = w[i, j]
            row = w[i]
            for c in range(nc):
                row[j + 1 + c] -= vi * tmp[c]
    return tau


@njit(cache=True)
def householder_form_q(w, tau):
    """Thin Q (m x n) by backward accumulation of the stored reflectors."""
    m, n = w.shape
    q = np.zeros((m, n))
    for i in range(n):
        q[i, i] = 1.0
    tmp = np.empty(n)
    for j in range(n - 1, -1, -1):
        t = tau[j]
        if t == 0.0:
            continue
        nc = n - j
        for c in range(nc):
            tmp[c] = q[j, j + c]
        for i in range(j + 1, m):
            vi = w[i, j]
            row = q[i]
            for c in range(nc):
                tmp[c] += vi * row[j + c]
        for c in range(nc):
            tmp[c] *= t
            q[j, j + c] -= tmp[c]
        for i in range(j + 1, m):
            vi = w[i, j]
            row = q[i]
            for c in range(nc):
                row[j + c] -= vi * tmp[c]
    return q


# --------------------------------------------------------------------------
# One-sided Jacobi. Rows of g are the columns being orthogonalized; rows of
# acc receive the same rotations when accumulate is set.


@njit(cache=True)
def jacobi_sweeps(g, acc, accumulate, tol, max_sweeps):
    """Returns the number of sweeps used, or -1 if max_sweeps was exhausted."""
    n, m = g.shape
    na = acc.shape[1]
    norms = np.empty(n)
    stack = np.empty(PAIRWISE_STACK)
    for sweep in range(max_sweeps):
        for p in range(n):
            norms[p] = pairwise_dot(g[p], g[p], 0, m, stack)
        # de Rijk ordering: largest columns first
        order = np.argsort(-norms, kind="mergesort")
        moved = False
        for p in range(n):
            if order[p] != p:
                moved = True
                break
        if moved:
            g[:, :] = g[order]
            norms[:] = norms[order]
            if accumulate:
                acc[:, :] = acc[order]
        rotations = 0
        for p in range(n - 1):
            gp = g[p]
            for q in range(p + 1, n):
                app = norms[p]
                aqq = norms[q]
                if app == 0.0 or aqq == 0.0:
                    continue
                gq = g[q]
                apq = pairwise_dot(gp, gq, 0, m, stack)
                if abs(apq) <= tol * math.sqrt(app) * math.sqrt(aqq):
                    continue
                rotations += 1
                zeta = (aqq - app) / (2.0 * apq)
                if abs(zeta) > 1e150:
                    t = 0.5 / zeta
                else:
                    t = math.copysign(1.0, zeta) / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                cs = 1.0 / math.sqrt(1.0 + t * t)
                sn = cs * t
                for i in range(m):
                    x = gp[i]
                    y = gq[i]
                    gp[i] = cs * x - sn * y
                    gq[i] = sn * x + cs * y
                if accumulate:
                    ap = acc[p]
                    aq = acc[q]
                    for i in range(na):
                        x = ap[i]
                        y = aq[i]
                        ap[i] = cs * x - sn * y
                        aq[i] = sn * x + cs * y
                new_p = app - t * apq
                new_q = aqq + t * apq
                # closed-form update loses digits under heavy cancellation
                if new_p < 0.01 * app:
                    new_p = pairwise_dot(gp, gp, 0, m, stack)
                if new_q < 0.01 * aqq:
                    new_q = pairwise_dot(gq, gq, 0, m, stack)
                norms[p] = new_p
                norms[q] = new_q
        if rotations == 0:
            return sweep + 1
    return -1


# --------------------------------------------------------------------------
# Counter-based normal generator (SplitMix64 finalizer + Box-Muller).

GOLDEN_GAMMA = np.uint64(0x9E3779B97F4A7C15)
MIX_1 = np.uint64(0xBF58476D1CE4E5B9)
MIX_2 = np.uint64(0x94D049BB133111EB)
TWO_M53 = 1.0 / 9007199254740992.0
TWO_PI = 2.0 * math.pi


@njit(cache=True)
def mix64(z):
    z = (z ^ (z >> np.uint64(30))) * MIX_1
    z = (z ^ (z >> np.uint64(27))) * MIX_2
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def fill_normals(out, key, first_pair):
    n = out.shape[0]
    npairs = (n + 1) // 2
    for j in range(npairs):
        idx = np.uint64(first_pair + j) * np.uint64(2)
        x1 = mix64(key + (idx + np.uint64(1)) * GOLDEN_GAMMA)
        x2 = mix64(key + (idx + np.uint64(2)) * GOLDEN_GAMMA)
        u1 = (np.float64(x1 >> np.uint64(11)) + 1.0) * TWO_M53
        u2 = (np.float64(x2 >> np.uint64(11)) + 1.0) * TWO_M53
        r = math.sqrt(-2.0 * math.log(u1))
        theta = TWO_PI * u2
        out[2 * j] = r * math.cos(theta)
        if 2 * j + 1 < n:
            out[2 * j + 1] = r * math.sin(theta)
