"""Oracles shared by the test modules."""

import math

import numpy as np


def rel_fro(x, ref):
    return np.linalg.norm(np.asarray(x) - np.asarray(ref)) / np.linalg.norm(ref)


def max_principal_angle(a, b):
    """Largest principal angle between the column spans of a and b."""
    qa, _ = np.linalg.qr(a)
    qb, _ = np.linalg.qr(b)
    # via the sine: acos loses half the digits near zero
    resid = qb - qa @ (qa.T @ qb)
    return math.asin(min(1.0, float(np.linalg.norm(resid, 2))))


def orth_error(q):
    return float(np.max(np.abs(q.T @ q - np.eye(q.shape[1]))))


def naive_matmul(a, b):
    """Triple-loop product with exactly rounded inner sums."""
    m, p = a.shape
    n = b.shape[1]
    out = np.empty((m, n))
    for i in range(m):
        for j in range(n):
            out[i, j] = math.fsum(a[i, t] * b[t, j] for t in range(p))
    return out
