"""Dense linear-algebra core: blocked GEMM, Householder QR, Jacobi SVD.

Matrices are plain 2-D ``numpy.ndarray`` objects holding float64 values in
row-major order. Every public function accepts any array-like, validates it
with :func:`as_matrix` and returns fresh C-contiguous arrays. The numerical
work happens in the compiled kernels of :mod:`rsvdkit._kernels`; numpy is
only used here for allocation, copies and elementwise bookkeeping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from . import _kernels
from .errors import ConvergenceError, NonFiniteError, ShapeError

#: Output tile edge (rows and columns) for GEMM.
GEMM_BLOCK = 64
#: Reduction-depth chunk for GEMM; one chunk of a row pair stays in L1.
GEMM_DEPTH = 256
#: Sweep limit for the Jacobi SVD.
JACOBI_MAX_SWEEPS = 30

_EPS = np.finfo(np.float64).eps
# singular values at or below this are treated as exact zeros when
# normalizing singular vectors
_ZERO_SIGMA = np.finfo(np.float64).tiny / _EPS

_threads = 1


def set_threads(n):
    """Set the number of threads used by the GEMM kernel.

    ``n == 1`` selects the serial kernel. Larger values select the parallel
    kernel, clamped to what numba was started with. Either way the output is
    bit-identical, because every output row block is reduced by one thread in
    a fixed order. Returns the thread count actually in effect.
    """
    global _threads
    if n < 1:
        raise ValueError(f"thread count must be >= 1, got {n}")
    n = min(int(n), numba.config.NUMBA_NUM_THREADS)
    if n > 1:
        numba.set_num_threads(n)
    _threads = n
    return n


def get_threads():
    return _threads


def as_matrix(a, name="a"):
    """Validate ``a`` as a finite, non-empty 2-D float64 matrix.

    Returns a C-contiguous float64 array, copying only when the input is not
    already in that form.
    """
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError(f"{name} must have at least one row and column, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise NonFiniteError(f"{name} contains NaN or infinite entries")
    return np.ascontiguousarray(arr)


@dataclass(frozen=True)
class QrFactors:
    """Thin QR factors: ``q`` is m x n with orthonormal columns, ``r`` is n x n
    upper triangular with a non-negative diagonal."""

    q: np.ndarray
    r: np.ndarray


@dataclass(frozen=True)
class SvdFactors:
    """Compact or truncated SVD ``u @ diag(sigma) @ v.T``.

    ``u`` is m x r, ``v`` is n x r, both with orthonormal columns, and
    ``sigma`` holds r non-negative values in non-increasing order. A full SVD
    whose square factors are padded with orthonormal complements and whose
    diagonal carries a zero block reduces to exactly this form once the
    padding is dropped, so only the compact form is stored.
    """

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    @property
    def rank(self):
        return self.sigma.shape[0]

    def truncate(self, k):
        if not 1 <= k <= self.rank:
            raise ValueError(f"cannot truncate {self.rank} singular triplets to {k}")
        return SvdFactors(
            np.ascontiguousarray(self.u[:, :k]),
            self.sigma[:k].copy(),
            np.ascontiguousarray(self.v[:, :k]),
        )

    def reconstruct(self):
        return gemm(1.0, self.u * self.sigma, self.v, transpose_b=True)


def _gemm_raw(a, b, transpose_a, transpose_b):
    op_a = np.ascontiguousarray(a.T if transpose_a else a)
    # packed so the reduction index is contiguous: rows of bt are columns of op(b)
    bt = np.ascontiguousarray(b if transpose_b else b.T)
    out = np.zeros((op_a.shape[0], bt.shape[0]))
    if _threads > 1:
        _kernels.gemm_parallel(op_a, bt, out, GEMM_BLOCK, GEMM_DEPTH)
    else:
        _kernels.gemm_serial(op_a, bt, out, GEMM_BLOCK, GEMM_DEPTH)
    return out


def gemm(alpha, a, b, beta=0.0, c=None, *, transpose_a=False, transpose_b=False):
    """General matrix multiply ``alpha * op(a) @ op(b) + beta * c``.

    ``op(x)`` is ``x.T`` when the matching transpose flag is set. The product
    is computed tile by tile (``GEMM_BLOCK`` x ``GEMM_BLOCK`` output tiles,
    reduction split in ``GEMM_DEPTH`` chunks) after packing both operands so
    that every inner product runs over contiguous memory. When ``beta`` is
    zero, ``c`` is not read and may be omitted.

    Raises
    ------
    ShapeError
        If the inner dimensions disagree or ``c`` has the wrong shape.
    """
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    ashape = a.shape[::-1] if transpose_a else a.shape
    bshape = b.shape[::-1] if transpose_b else b.shape
    if ashape[1] != bshape[0]:
        raise ShapeError(
            f"inner dimensions disagree: op(a) is {ashape[0]}x{ashape[1]}, "
            f"op(b) is {bshape[0]}x{bshape[1]}"
        )
    out_shape = (ashape[0], bshape[1])
    if beta != 0.0:
        if c is None:
            raise ShapeError(f"beta={beta} needs c of shape {out_shape[0]}x{out_shape[1]}")
        c = as_matrix(c, "c")
        if c.shape != out_shape:
            raise ShapeError(
                f"c is {c.shape[0]}x{c.shape[1]}, expected {out_shape[0]}x{out_shape[1]} "
                f"for op(a) {ashape[0]}x{ashape[1]} times op(b) {bshape[0]}x{bshape[1]}"
            )
    out = _gemm_raw(a, b, transpose_a, transpose_b)
    if alpha != 1.0:
        out *= alpha
    if beta != 0.0:
        out += beta * c
    return out


def matmul(a, b, *, transpose_a=False, transpose_b=False):
    """Shorthand for ``gemm(1.0, a, b, ...)``."""
    return gemm(1.0, a, b, transpose_a=transpose_a, transpose_b=transpose_b)


def frobenius_norm(a):
    """Frobenius norm with pairwise summation of the squared entries.

    Falls back to a max-scaled evaluation when the plain sum of squares
    overflows or underflows.
    """
    a = as_matrix(a)
    flat = a.ravel()
    total = _kernels.sum_of_squares(flat)
    if math.isfinite(total) and total > np.finfo(np.float64).tiny:
        return math.sqrt(total)
    scale = float(np.max(np.abs(flat)))
    if scale == 0.0:
        return 0.0
    scaled = flat / scale
    return scale * math.sqrt(_kernels.sum_of_squares(scaled))


def _householder(a):
    """Factor in place on a private copy; returns (reflectors, tau)."""
    w = np.array(a, dtype=np.float64, order="C", copy=True)
    tau = _kernels.householder_factor(w)
    return w, tau


def _upper(w, n):
    return np.triu(w[:n, :n])


def householder_qr(a):
    """Thin QR factorization by Householder reflections.

    The sign of each column of Q is chosen so that R has a non-negative
    diagonal, which makes the factorization unique for full-rank input.

    Raises
    ------
    ShapeError
        If ``a`` has fewer rows than columns. Transpose first.
    """
    a = as_matrix(a)
    m, n = a.shape
    if m < n:
        raise ShapeError(f"householder_qr needs rows >= cols, got {m}x{n}; transpose first")
    w, tau = _householder(a)
    q = _kernels.householder_form_q(w, tau)
    r = _upper(w, n)
    neg = np.diagonal(r) < 0.0
    if neg.any():
        r[neg, :] *= -1.0
        q[:, neg] *= -1.0
    return QrFactors(q, r)


def fix_signs(u, v):
    """Flip paired columns in place so the largest-magnitude entry of each
    column of ``u`` is positive."""
    cols = np.arange(u.shape[1])
    flip = u[np.argmax(np.abs(u), axis=0), cols] < 0.0
    u[:, flip] *= -1.0
    v[:, flip] *= -1.0
    return u, v


def _jacobi_tolerance(length):
    return max(math.sqrt(length), 4.0) * _EPS


def _run_jacobi(g, acc, accumulate):
    sweeps = _kernels.jacobi_sweeps(g, acc, accumulate, _jacobi_tolerance(g.shape[1]), JACOBI_MAX_SWEEPS)
    if sweeps < 0:
        raise ConvergenceError(
            f"Jacobi SVD did not converge in {JACOBI_MAX_SWEEPS} sweeps", JACOBI_MAX_SWEEPS
        )
    return sweeps


def _row_norms(g):
    return np.array([math.sqrt(_kernels.sum_of_squares(row)) for row in g])


def _complete_columns(mat, bad):
    """Replace the columns flagged in ``bad`` by an orthonormal completion."""
    good = [j for j in range(mat.shape[1]) if not bad[j]]
    basis = mat[:, good]
    for j in np.flatnonzero(bad):
        for i in range(mat.shape[0]):
            cand = np.zeros(mat.shape[0])
            cand[i] = 1.0
            for _ in range(2):
                cand -= basis @ (basis.T @ cand)
            nrm = np.linalg.norm(cand)
            if nrm > 0.5:
                mat[:, j] = cand / nrm
                basis = np.column_stack([basis, mat[:, j]])
                break
    return mat


def _jacobi_svd(a, compute_uv):
    m, n = a.shape
    wide = m < n
    x = a.T if wide else a
    rows, cols = x.shape
    precondition = rows > cols

    if precondition:
        # Jacobi on the columns of R^T, where x = Q R
        w, tau = _householder(x)
        g = _upper(w, cols)
    else:
        g = np.ascontiguousarray(x.T).copy()
    acc = np.eye(cols) if compute_uv else np.empty((cols, 0))
    _run_jacobi(g, acc, compute_uv)

    sigma = _row_norms(g)
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    if not compute_uv:
        return sigma, None, None

    g = g[order]
    acc = acc[order]
    zero = sigma <= _ZERO_SIGMA
    safe = np.where(zero, 1.0, sigma)
    normalized = np.ascontiguousarray((g / safe[:, None]).T)
    if zero.any():
        normalized[:, zero] = 0.0
        normalized = _complete_columns(normalized, zero)
    if precondition:
        q = _kernels.householder_form_q(w, tau)
        u_x = gemm(1.0, q, acc, transpose_b=True)
        v_x = normalized
    else:
        u_x = normalized
        v_x = np.ascontiguousarray(acc.T)

    # a = x^T = V_x S U_x^T when a is wide
    u, v = (v_x, u_x) if wide else (u_x, v_x)
    fix_signs(u, v)
    return sigma, u, v


def dense_svd(a):
    """Compact SVD of a small or moderate dense matrix by one-sided Jacobi.

    The rotations run on the taller orientation of ``a``. Strictly tall
    inputs are first reduced to their triangular QR factor, so the rotations
    act on vectors of length ``min(m, n)``. Columns are reordered by norm
    before each sweep; convergence is declared once a full sweep performs no
    rotation, with the relative threshold
    ``|g_pq| <= max(sqrt(len), 4) * eps * sqrt(g_pp * g_qq)``.

    Returns
    -------
    SvdFactors
        ``min(m, n)`` singular triplets, sigma sorted non-increasing. The sign
        of each pair of singular vectors is fixed so that the largest-magnitude
        entry of each column of ``u`` is positive.

    Raises
    ------
    ConvergenceError
        If ``JACOBI_MAX_SWEEPS`` sweeps do not suffice.
    """
    a = as_matrix(a)
    sigma, u, v = _jacobi_svd(a, compute_uv=True)
    return SvdFactors(np.ascontiguousarray(u), sigma, np.ascontiguousarray(v))


def singular_values(a):
    """Singular values only, from the same rotations as :func:`dense_svd`.

    Skips forming Q and accumulating the rotations, so the returned vector is
    bit-identical to ``dense_svd(a).sigma`` at lower cost.
    """
    a = as_matrix(a)
    sigma, _, _ = _jacobi_svd(a, compute_uv=False)
    return sigma
