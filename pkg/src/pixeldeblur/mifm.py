"""Forward model of a single microbolometer pixel.

The membrane temperature ``y`` follows the first-order lag

    tau * dy/dt + y = x(t),

where ``x`` is the steady-state temperature the pixel would settle to under
the current incident power. Inputs are piecewise constant, so the response is
evaluated exactly, one constant piece at a time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParameterError, ResolutionError, ShapeError

__all__ = [
    "MicrobolometerParams",
    "PiecewiseSignal",
    "MeasurementWindow",
    "power_to_steady_state",
    "simulate_response",
]


@dataclass(frozen=True)
class MicrobolometerParams:
    """Thermal constants of one pixel.

    Attributes:
        c_th: thermal capacitance (J/K).
        g_th: thermal conductance (W/K).
        alpha: absorptivity, in (0, 1].
        t_substrate: substrate temperature (K).
    """

    c_th: float = 0.011
    g_th: float = 1.0
    alpha: float = 1.0
    t_substrate: float = 0.0

    def __post_init__(self):
        if not self.c_th > 0:
            raise ParameterError(f"c_th must be positive, got {self.c_th}")
        if not self.g_th > 0:
            raise ParameterError(f"g_th must be positive, got {self.g_th}")
        if not 0 < self.alpha <= 1:
            raise ParameterError(f"alpha must lie in (0, 1], got {self.alpha}")

    @property
    def tau(self) -> float:
        """Thermal time constant in seconds."""
        return self.c_th / self.g_th


def _is_pow2(k: int) -> bool:
    return k >= 1 and (k & (k - 1)) == 0


@dataclass(frozen=True)
class PiecewiseSignal:
    """A signal that is constant on each of K equal bins of ``[t0, t0 + dt_total)``.

    ``coeffs[k]`` is the value on ``[t0 + k*dt/K, t0 + (k+1)*dt/K)``.
    """

    t0: float
    dt_total: float
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=np.float64).reshape(-1)
        if not _is_pow2(coeffs.size):
            raise ResolutionError(f"number of coefficients must be a power of two, got {coeffs.size}")
        if not self.dt_total > 0:
            raise ParameterError(f"dt_total must be positive, got {self.dt_total}")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def size(self) -> int:
        return self.coeffs.size

    @property
    def t_end(self) -> float:
        return self.t0 + self.dt_total

    def breakpoints(self) -> np.ndarray:
        """Bin edges, K + 1 values from t0 to t0 + dt_total."""
        k = np.arange(self.size + 1)
        return self.t0 + k * (self.dt_total / self.size)


@dataclass(frozen=True)
class MeasurementWindow:
    """N + 1 timestamped membrane temperatures of one pixel."""

    times: np.ndarray
    values: np.ndarray
    tau: float

    def __post_init__(self):
        times = np.array(self.times, dtype=np.float64).reshape(-1)
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        if times.size != values.size:
            raise ShapeError(f"{times.size} times but {values.size} values")
        if times.size < 2:
            raise ShapeError("a window needs at least two samples")
        if np.any(np.diff(times) <= 0):
            raise ParameterError("sample times must be strictly increasing")
        if not self.tau > 0:
            raise ParameterError(f"tau must be positive, got {self.tau}")
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        """Number of constraints, i.e. samples minus one."""
        return self.times.size - 1


def power_to_steady_state(phi, params: MicrobolometerParams):
    """Map incident power (W) to the steady-state membrane temperature (K)."""
    if not params.g_th > 0:
        raise ParameterError(f"g_th must be positive, got {params.g_th}")
    return params.t_substrate + (params.alpha / params.g_th) * np.asarray(phi, dtype=np.float64)[()]


def simulate_response(signal: PiecewiseSignal, y0: float, tau: float, sample_times) -> np.ndarray:
    """Exact membrane temperature at ``sample_times`` for a piecewise-constant input.

    ``y0`` is the membrane temperature at ``signal.t0``. Sample times may be in
    any order but must lie in the closed interval ``[t0, t0 + dt_total]``.
    """
    if not tau > 0:
        raise ParameterError(f"tau must be positive, got {tau}")
    ts = np.asarray(sample_times, dtype=np.float64)
    flat = ts.reshape(-1)
    if flat.size and (flat.min() < signal.t0 or flat.max() > signal.t_end):
        raise DomainError(
            f"sample times must lie in [{signal.t0}, {signal.t_end}], "
            f"got [{flat.min()}, {flat.max()}]"
        )

    edges = signal.breakpoints()
    coeffs = signal.coeffs
    order = np.argsort(flat, kind="stable")
    out = np.empty_like(flat)

    y = float(y0)
    t = signal.t0
    k = 0
    for idx in order:
        target = flat[idx]
        # advance through complete bins that end before the target
        while k < coeffs.size and edges[k + 1] <= target:
            y = _relax(y, coeffs[k], edges[k + 1] - t, tau)
            t = edges[k + 1]
            k += 1
        if target > t:
            y = _relax(y, coeffs[k], target - t, tau)
            t = target
        out[idx] = y
    return out.reshape(ts.shape)


def _relax(y: float, y_ss: float, delta: float, tau: float) -> float:
    return y_ss + (y - y_ss) * math.exp(-delta / tau)
