"""Randomized k-SVD.

The pipeline is

1. draw an n x s Gaussian matrix Omega and form ``Y = A Omega``     O(mns)
2. run q rounds of subspace iteration, ``Y <- A A^T Y``            O(mns) per round
3. orthonormal basis Q of range(Y) by Householder QR               O(ms^2)
4. project, ``B = Q^T A``                                          O(mns)
5. small SVD ``B = U_B S V^T``                                     O(ns^2)
6. back-project, ``U = Q U_B``                                     O(msk)

and returns the top k triplets. Step 6 is skipped when only singular values
are wanted. Every matrix product goes through :func:`rsvdkit.dense.gemm`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .dense import (
    SvdFactors,
    as_matrix,
    dense_svd,
    fix_signs,
    frobenius_norm,
    gemm,
    householder_qr,
    singular_values,
)
from .errors import ShapeError
from .sampling import GaussianSampler, gaussian_matrix

#: Columns of Y whose R diagonal falls below this fraction of ||Y||_F are
#: treated as numerically dependent and dropped from the range basis.
RANK_DROP_TOL = 1e-13


@dataclass(frozen=True)
class RsvdConfig:
    """Parameters of one randomized k-SVD solve.

    The sketch width is ``min(k + oversample, min(m, n))``. With
    ``epsilon_mode`` it is ``min(ceil(k / epsilon), min(m, n))`` instead; the
    constant hidden in ``s = O(k / epsilon)`` is taken as 1. Otherwise
    ``epsilon`` is only carried along as the nominal accuracy target.
    """

    k: int
    oversample: int = 10
    power_q: int = 2
    seed: int = 0
    epsilon: float = 0.5
    epsilon_mode: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.oversample < 0:
            raise ValueError(f"oversample must be >= 0, got {self.oversample}")
        if self.power_q < 0:
            raise ValueError(f"power_q must be >= 0, got {self.power_q}")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    def sketch_width(self, m, n):
        cap = min(m, n)
        if self.epsilon_mode:
            return min(math.ceil(self.k / self.epsilon), cap)
        return min(self.k + self.oversample, cap)


@dataclass(eq=False)
class RsvdResult:
    """Top-k factors ``u`` (m x k), ``sigma`` (k), ``v`` (n x k) of A.

    ``residual_fro`` is ``||A - u diag(sigma) v^T||_F``, evaluated on first
    access.
    """

    factors: SvdFactors
    sketch_width: int
    source: np.ndarray = field(repr=False)

    @property
    def u(self):
        return self.factors.u

    @property
    def sigma(self):
        return self.factors.sigma

    @property
    def v(self):
        return self.factors.v

    @cached_property
    def residual_fro(self):
        diff = gemm(-1.0, self.u * self.sigma, self.v, 1.0, self.source, transpose_b=True)
        return frobenius_norm(diff)


def sketch(a, s, sampler):
    """``A @ Omega`` for an n x s standard-normal Omega drawn from ``sampler``."""
    a = as_matrix(a)
    m, n = a.shape
    if not 1 <= s <= min(m, n):
        raise ValueError(f"sketch width must satisfy 1 <= s <= {min(m, n)}, got {s}")
    omega = gaussian_matrix(sampler, n, s)
    return gemm(1.0, a, omega)


def range_basis(y, min_cols=1):
    """Orthonormal basis for the range of ``y`` from its thin Householder QR.

    Columns whose ``|R_jj|`` is at most ``RANK_DROP_TOL * ||y||_F`` are
    dropped, so a rank-deficient ``y`` yields fewer columns. At least
    ``min_cols`` columns are kept (those with the largest ``|R_jj|``), which
    lets callers that need k directions still get an orthonormal set.
    """
    y = as_matrix(y, "y")
    qr = householder_qr(y)
    diag = np.abs(np.diagonal(qr.r))
    keep = diag > RANK_DROP_TOL * frobenius_norm(y)
    need = min(max(min_cols, 1), y.shape[1])
    if keep.sum() < need:
        largest = np.argsort(-diag, kind="stable")[:need]
        keep = np.zeros_like(keep)
        keep[largest] = True
    if keep.all():
        return qr.q
    return np.ascontiguousarray(qr.q[:, keep])


def power_iterate(a, y0, q, *, min_cols=1, at=None):
    """Subspace iteration towards the range of ``(A A^T)^q Y0``.

    Every application of ``A^T`` or ``A`` is followed by
    :func:`range_basis`, which keeps the iterate orthonormal instead of
    letting the columns collapse onto the dominant direction. ``q = 0``
    returns the orthonormalized ``y0``.

    ``at`` may carry a contiguous copy of ``a.T`` so the transposed products
    do not repack ``a`` on every round.
    """
    a = as_matrix(a)
    y0 = as_matrix(y0, "y0")
    if y0.shape[0] != a.shape[0]:
        raise ShapeError(f"y0 has {y0.shape[0]} rows but a is {a.shape[0]}x{a.shape[1]}")
    if q < 0:
        raise ValueError(f"q must be >= 0, got {q}")
    y = range_basis(y0, min_cols)
    for _ in range(q):
        if at is not None:
            z = gemm(1.0, at, y)
        else:
            z = gemm(1.0, a, y, transpose_a=True)
        z = range_basis(z, min_cols)
        y = range_basis(gemm(1.0, a, z), min_cols)
    return y


def _project(a, qbasis, at):
    if at is not None:
        return gemm(1.0, qbasis, at, transpose_a=True, transpose_b=True)
    return gemm(1.0, qbasis, a, transpose_a=True)


def project_and_solve(a, qbasis, k, *, at=None):
    """Steps 4-6: ``B = Q^T A``, ``B = U_B S V^T``, ``U = Q U_B``, truncated to k."""
    a = as_matrix(a)
    qbasis = as_matrix(qbasis, "qbasis")
    if qbasis.shape[0] != a.shape[0]:
        raise ShapeError(f"qbasis has {qbasis.shape[0]} rows but a is {a.shape[0]}x{a.shape[1]}")
    if not 1 <= k <= qbasis.shape[1]:
        raise ValueError(f"k={k} exceeds the {qbasis.shape[1]} basis columns")
    b = _project(a, qbasis, at)
    small = dense_svd(b).truncate(k)
    u = gemm(1.0, qbasis, small.u)
    u, v = fix_signs(u, small.v.copy())
    return RsvdResult(SvdFactors(u, small.sigma, v), qbasis.shape[1], a)


def _oriented(a, cfg):
    a = as_matrix(a)
    m, n = a.shape
    if not 1 <= cfg.k <= min(m, n):
        raise ValueError(f"k must satisfy 1 <= k <= {min(m, n)} for a {m}x{n} matrix, got {cfg.k}")
    if m < n:
        return np.ascontiguousarray(a.T), a, True
    return a, np.ascontiguousarray(a.T), False


def _range(work, work_t, cfg):
    m, n = work.shape
    sampler = GaussianSampler(cfg.seed)
    y = sketch(work, cfg.sketch_width(m, n), sampler)
    y = power_iterate(work, y, cfg.power_q, min_cols=cfg.k, at=work_t)
    return range_basis(y, cfg.k)


def randomized_ksvd(a, cfg):
    """Randomized rank-k SVD of ``a``.

    Wide inputs are handled by factoring ``a.T`` and swapping the roles of u
    and v. The result is a deterministic function of ``a`` and ``cfg``.
    """
    work, work_t, wide = _oriented(a, cfg)
    qbasis = _range(work, work_t, cfg)
    res = project_and_solve(work, qbasis, cfg.k, at=work_t)
    if not wide:
        return res
    u, v = fix_signs(res.v.copy(), res.u.copy())
    return RsvdResult(SvdFactors(u, res.sigma, v), res.sketch_width, as_matrix(a))


def singular_values_only(a, cfg):
    """Top-k singular values by steps 1-5, without back-projection.

    Bit-identical to ``randomized_ksvd(a, cfg).sigma``.
    """
    work, work_t, _ = _oriented(a, cfg)
    qbasis = _range(work, work_t, cfg)
    if not cfg.k <= qbasis.shape[1]:
        raise ValueError(f"k={cfg.k} exceeds the {qbasis.shape[1]} basis columns")
    return singular_values(_project(work, qbasis, work_t))[: cfg.k]
