"""Linear system ``Y = V A`` linking a window of samples to piecewise-constant inputs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, ShapeError
from .mifm import MeasurementWindow

__all__ = ["LinearSystem", "build_system", "system_matrix", "measurement_vector", "residual"]


@dataclass(frozen=True)
class LinearSystem:
    v: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    t0: float
    dt_total: float
    tau: float
    resolution: int


def system_matrix(times, tau: float, n: int) -> np.ndarray:
    """N x 2**n weight matrix for sample times ``t_0..t_N``.

    Entry (j, k) is the weight bin k of ``[t_0, t_N)`` contributes to the
    sample at ``t_{j+1}``:

        exp(-s_j) * (exp(g_hi) - exp(g_lo))   if g_lo < g_hi else 0

    with ``s_j = (t_{j+1} - t_0)/tau``, ``g_lo = k/K * dt/tau`` and
    ``g_hi = min((k+1)/K * dt/tau, s_j)``. The exponentials are folded
    together as ``exp(g - s_j)`` so nothing overflows for long windows.
    """
    times = np.asarray(times, dtype=np.float64).reshape(-1)
    if n < 0:
        raise ParameterError(f"resolution exponent must be non-negative, got {n}")
    if times.size < 2:
        raise ShapeError("need at least two sample times")
    if not tau > 0:
        raise ParameterError(f"tau must be positive, got {tau}")
    K = 1 << n
    dt = times[-1] - times[0]
    s = (times[1:] - times[0]) / tau
    k = np.arange(K, dtype=np.float64)
    g_lo = np.maximum(k / K * (dt / tau), 0.0)[None, :]
    g_hi = np.minimum((k + 1) / K * (dt / tau), s[:, None])
    active = g_lo < g_hi
    with np.errstate(over="ignore"):
        v = np.exp(g_hi - s[:, None]) - np.exp(g_lo - s[:, None])
    return np.where(active, v, 0.0)


def measurement_vector(times, values, tau: float) -> np.ndarray:
    """``Y_j = y(t_{j+1}) - y(t_0) exp(-(t_{j+1} - t_0)/tau)``.

    ``values`` may carry trailing axes (e.g. pixels); the sample axis is first.
    """
    times = np.asarray(times, dtype=np.float64).reshape(-1)
    values = np.asarray(values, dtype=np.float64)
    decay = np.exp(-(times[1:] - times[0]) / tau)
    decay = decay.reshape((-1,) + (1,) * (values.ndim - 1))
    return values[1:] - values[0] * decay


def build_system(window: MeasurementWindow, n: int) -> LinearSystem:
    v = system_matrix(window.times, window.tau, n)
    y = measurement_vector(window.times, window.values, window.tau)
    return LinearSystem(
        v=v,
        y=y,
        t0=float(window.times[0]),
        dt_total=float(window.times[-1] - window.times[0]),
        tau=window.tau,
        resolution=1 << n,
    )


def residual(system: LinearSystem, a) -> np.ndarray:
    """``V a - Y``."""
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (system.resolution,):
        raise ShapeError(f"expected {system.resolution} coefficients, got shape {a.shape}")
    return system.v @ a - system.y
