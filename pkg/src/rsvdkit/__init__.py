"""Randomized k-SVD on self-contained dense kernels."""

from .dense import QrFactors, SvdFactors, dense_svd, gemm, householder_qr, singular_values
from .errors import ConvergenceError, DmatError, NonFiniteError, ShapeError
from .pca import PcaModel, fit_pca, transform
from .rsvd import RsvdConfig, RsvdResult, randomized_ksvd, singular_values_only
from .sampling import GaussianSampler
from .synth import FastDecay, SharpDecay, SlowDecay, SynthSpec, synth_matrix

__all__ = [
    "ConvergenceError",
    "DmatError",
    "FastDecay",
    "GaussianSampler",
    "NonFiniteError",
    "PcaModel",
    "QrFactors",
    "RsvdConfig",
    "RsvdResult",
    "ShapeError",
    "SharpDecay",
    "SlowDecay",
    "SvdFactors",
    "SynthSpec",
    "dense_svd",
    "fit_pca",
    "gemm",
    "householder_qr",
    "randomized_ksvd",
    "singular_values",
    "singular_values_only",
    "synth_matrix",
    "transform",
]
