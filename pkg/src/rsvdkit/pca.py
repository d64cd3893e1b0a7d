"""Principal component analysis through the randomized k-SVD.

Data matrices hold one sample per row (N x d). Components are the right
singular vectors of the centered data and the explained variances are
``sigma**2 / (N - 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dense import as_matrix, gemm
from .errors import ShapeError
from .rsvd import RsvdConfig, randomized_ksvd


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray

    @property
    def dim(self):
        return self.components.shape[0]

    @property
    def k(self):
        return self.components.shape[1]


def center_columns(x):
    """Subtract the per-column mean. Returns ``(centered, mean)``.

    The mean gets one corrective second pass, which pulls the column sums
    of the output down to rounding level even when the data sit far from
    the origin.
    """
    x = as_matrix(x, "x")
    n = x.shape[0]
    if n < 2:
        raise ShapeError(f"centering needs at least 2 rows, got {n}")
    mean = x.mean(axis=0)
    centered = x - mean
    shift = centered.mean(axis=0)
    mean = mean + shift
    centered -= shift
    return np.ascontiguousarray(centered), mean


def fit_pca(x, k, cfg=None):
    x = as_matrix(x, "x")
    n, d = x.shape
    if not 1 <= k <= min(n, d):
        raise ValueError(f"k must satisfy 1 <= k <= {min(n, d)} for {n}x{d} data, got {k}")
    if cfg is None:
        cfg = RsvdConfig(k=k)
    elif cfg.k != k:
        cfg = replace(cfg, k=k)
    centered, mean = center_columns(x)
    res = randomized_ksvd(centered, cfg)
    variance = res.sigma**2 / (n - 1)
    return PcaModel(mean, np.ascontiguousarray(res.v), variance)


def transform(model, x):
    """Scores ``(x - mean) @ components``, one row per sample."""
    x = as_matrix(x, "x")
    if x.shape[1] != model.dim:
        raise ShapeError(f"x has {x.shape[1]} columns but the model has dimension {model.dim}")
    return gemm(1.0, x - model.mean, model.components)


def inverse_transform(model, scores):
    scores = as_matrix(scores, "scores")
    if scores.shape[1] != model.k:
        raise ShapeError(f"scores have {scores.shape[1]} columns but the model keeps {model.k}")
    return gemm(1.0, scores, model.components, transpose_b=True) + model.mean
