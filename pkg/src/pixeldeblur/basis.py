"""Piecewise-constant signals on dyadic grids and the orthonormal Haar matrix."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DomainError, ResolutionError
from .mifm import PiecewiseSignal, _is_pow2

__all__ = ["HaarBasis", "eval_piecewise", "project", "refine", "haar_matrix"]


@dataclass(frozen=True)
class HaarBasis:
    """Orthonormal K x K Haar matrix.

    Row 0 is the scaling vector ``1/sqrt(K)``. The remaining rows are wavelets
    ordered coarse to fine and, within a scale, left to right. Row ``2**j + m``
    is supported on bins ``[m*L, (m+1)*L)`` with ``L = K / 2**j``, equal to
    ``+1/sqrt(L)`` on the first half and ``-1/sqrt(L)`` on the second.

    Because the matrix is orthonormal, ``analyze`` and ``synthesize`` are exact
    inverses and a unit L1 penalty on the coefficients weighs every scale the
    same.
    """

    size: int
    matrix: np.ndarray = field(repr=False)

    def analyze(self, a):
        """Coefficients ``D = H A``."""
        return self.matrix @ np.asarray(a, dtype=np.float64)

    def synthesize(self, d):
        """Signal ``A = H^T D``."""
        return self.matrix.T @ np.asarray(d, dtype=np.float64)


def eval_piecewise(signal: PiecewiseSignal, t):
    """Value of ``signal`` at time(s) ``t``; bins are right-open."""
    ts = np.asarray(t, dtype=np.float64)
    if np.any(ts < signal.t0) or np.any(ts >= signal.t_end):
        raise DomainError(f"t must lie in [{signal.t0}, {signal.t_end})")
    k = np.floor((ts - signal.t0) * signal.size / signal.dt_total).astype(np.int64)
    # floating point can push t just below t_end onto index K
    k = np.minimum(k, signal.size - 1)
    return signal.coeffs[k][()]


def project(dense, k: int, t0: float = 0.0, dt_total: float = 1.0) -> PiecewiseSignal:
    """Average ``dense`` uniform samples into ``k`` equal bins."""
    dense = np.asarray(dense, dtype=np.float64).reshape(-1)
    if not _is_pow2(k):
        raise ResolutionError(f"target resolution must be a power of two, got {k}")
    if dense.size % k:
        raise ResolutionError(f"{k} bins do not divide {dense.size} samples")
    coeffs = dense.reshape(k, -1).mean(axis=1)
    return PiecewiseSignal(t0, dt_total, coeffs)


def refine(signal: PiecewiseSignal) -> PiecewiseSignal:
    return PiecewiseSignal(signal.t0, signal.dt_total, np.repeat(signal.coeffs, 2))


def haar_matrix(k: int) -> HaarBasis:
    if not isinstance(k, (int, np.integer)) or not _is_pow2(int(k)):
        raise ResolutionError(f"Haar size must be a power of two, got {k}")
    return _haar_cached(int(k))


@lru_cache(maxsize=None)
def _haar_cached(k: int) -> HaarBasis:
    h = np.zeros((k, k))
    h[0, :] = 1.0 / math.sqrt(k)
    row = 1
    scale = 0
    while (1 << scale) < k:
        length = k >> scale
        half = length // 2
        v = 1.0 / math.sqrt(length)
        for m in range(1 << scale):
            start = m * length
            h[row, start:start + half] = v
            h[row, start + half:start + length] = -v
            row += 1
        scale += 1
    h.setflags(write=False)
    return HaarBasis(k, h)
