"""Seeded, counter-based standard-normal sampling.

The stream is frozen so it can be reproduced bit for bit elsewhere:

* ``mix64(z)`` is the SplitMix64 finalizer::

      z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
      z = (z ^ (z >> 27)) * 0x94D049BB133111EB
      z =  z ^ (z >> 31)

  with all arithmetic modulo 2**64.
* A sampler with ``seed`` and ``stream`` has the key
  ``mix64(seed ^ mix64((stream + 1) * G))`` where ``G = 0x9E3779B97F4A7C15``.
* Uniform word ``i`` (``i = 0, 1, ...``) is ``mix64(key + (i + 1) * G)`` and
  maps to ``u_i = ((word >> 11) + 1) * 2**-53``, which lies in (0, 1].
* Normal pair ``j`` uses ``u1 = u_{2j}``, ``u2 = u_{2j+1}`` (Box-Muller):
  ``r = sqrt(-2 ln u1)``, ``z_{2j} = r cos(2 pi u2)``, ``z_{2j+1} = r sin(2 pi u2)``.

Draws are handed out in whole pairs. A request for an odd number of values
discards the sine half of its last pair, so the next request starts on a
fresh pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def _mix64_int(z):
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def stream_key(seed, stream=0):
    return _mix64_int(seed ^ _mix64_int((stream + 1) * _GAMMA))


@dataclass
class GaussianSampler:
    """Source of independent N(0, 1) draws.

    ``counter`` is the number of normal pairs consumed so far. Two samplers
    with the same seed and stream that are asked for the same sequence of
    draws return bit-identical values. Do not share one sampler between
    threads.
    """

    seed: int
    stream: int = 0
    counter: int = 0

    def __post_init__(self):
        for name in ("seed", "stream"):
            value = getattr(self, name)
            if not 0 <= value <= _MASK:
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {value}")

    def normals(self, count):
        """Return ``count`` fresh standard-normal values and advance the counter."""
        if count < 0:
            raise ValueError(f"count must be non-negative, got {count}")
        out = np.empty(count)
        if count:
            key = np.uint64(stream_key(self.seed, self.stream))
            _kernels.fill_normals(out, key, self.counter)
            self.counter += (count + 1) // 2
        return out


def gaussian_matrix(sampler, rows, cols):
    """``rows x cols`` matrix of standard-normal draws, filled in row-major order."""
    if rows < 1 or cols < 1:
        raise ValueError(f"gaussian_matrix needs rows, cols >= 1, got {rows}x{cols}")
    return sampler.normals(rows * cols).reshape(rows, cols)
