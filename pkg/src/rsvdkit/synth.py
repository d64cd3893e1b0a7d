"""Test matrices with a prescribed singular spectrum.

``synth_matrix`` builds ``A = U diag(sigma) V^T`` from Haar-random orthogonal
factors and one of three decay laws (1-based index ``i``):

* fast decay:   ``sigma_i = 1 / i**2``
* sharp decay:  ``sigma_i = 1e-4 + 1 / (1 + exp(i + 1 - beta))``
* slow decay:   ``sigma_i = 1 / i**0.1``
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .dense import gemm, householder_qr
from .sampling import GaussianSampler, gaussian_matrix

#: Sampler stream reserved for matrix generation, so that a synthetic matrix
#: and a sketch drawn with the same seed are independent.
SYNTH_STREAM = 1


@dataclass(frozen=True)
class FastDecay:
    name = "fast"


@dataclass(frozen=True)
class SharpDecay:
    beta: float
    name = "sharp"

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"sharp decay needs beta > 0, got {self.beta}")


@dataclass(frozen=True)
class SlowDecay:
    name = "slow"


SpectrumKind = Union[FastDecay, SharpDecay, SlowDecay]


def parse_spectrum(name, beta=None):
    """Map ``"fast" | "sharp" | "slow"`` to a spectrum kind."""
    if name == "fast":
        return FastDecay()
    if name == "slow":
        return SlowDecay()
    if name == "sharp":
        if beta is None:
            raise ValueError("sharp decay needs a beta")
        return SharpDecay(float(beta))
    raise ValueError(f"unknown spectrum {name!r}, expected fast, sharp or slow")


def spectrum_value(kind, i):
    if i < 1:
        raise ValueError(f"spectrum index is 1-based, got {i}")
    if isinstance(kind, FastDecay):
        return 1.0 / (i * i)
    if isinstance(kind, SlowDecay):
        return 1.0 / i**0.1
    if isinstance(kind, SharpDecay):
        x = i + 1 - kind.beta
        # exp overflows past ~709; the sigmoid term is 0 to double precision long before
        tail = 0.0 if x > 700.0 else 1.0 / (1.0 + math.exp(x))
        return 0.0001 + tail
    raise TypeError(f"not a spectrum kind: {kind!r}")


def spectrum(kind, n):
    """The first ``n`` singular values of ``kind`` as an array."""
    return np.array([spectrum_value(kind, i) for i in range(1, n + 1)])


@dataclass(frozen=True)
class SynthSpec:
    rows: int
    cols: int
    kind: SpectrumKind
    seed: int = 0

    def __post_init__(self):
        if not self.rows >= self.cols >= 1:
            raise ValueError(f"synthetic matrices need rows >= cols >= 1, got {self.rows}x{self.cols}")


def random_orthonormal_columns(rows, cols, sampler):
    """First ``cols`` columns of a Haar-distributed ``rows x rows`` orthogonal matrix.

    Thin QR of a Gaussian matrix with R's diagonal forced positive, which is
    what makes the distribution rotation-invariant.
    """
    return householder_qr(gaussian_matrix(sampler, rows, cols)).q


def random_orthogonal(dim, sampler):
    """Haar-distributed ``dim x dim`` orthogonal matrix."""
    return random_orthonormal_columns(dim, dim, sampler)


def synth_matrix(spec):
    """``U_n diag(sigma) V^T`` for a :class:`SynthSpec`.

    ``U_n`` holds the first n columns of a random m x m orthogonal matrix and
    is drawn directly as an m x n factor, so the cost is O(m n^2).
    """
    sampler = GaussianSampler(spec.seed, SYNTH_STREAM)
    u = random_orthonormal_columns(spec.rows, spec.cols, sampler)
    v = random_orthogonal(spec.cols, sampler)
    sigma = spectrum(spec.kind, spec.cols)
    return gemm(1.0, u * sigma, v, transpose_b=True)


def low_rank_matrix(rows, cols, rank, seed=0):
    """Product of ``rows x rank`` and ``rank x cols`` Gaussian matrices."""
    sampler = GaussianSampler(seed, SYNTH_STREAM)
    left = gaussian_matrix(sampler, rows, rank)
    right = gaussian_matrix(sampler, rank, cols)
    return gemm(1.0, left, right)
