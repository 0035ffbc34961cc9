"""Synthetic ground truth, sensor simulation and recovery metrics.

Scenes are rasterized without anti-aliasing so every pixel sees an exactly
piecewise-constant steady-state temperature. Truth frame ``f`` is the
scene at time ``f*T`` and is taken to drive the sensor over ``((f-1)T, fT]``,
so the sample at ``fT`` already responds to frame ``f``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, ShapeError, SpecError
from .mifm import PiecewiseSignal, simulate_response
from .pipeline import ThermalVideo
from .solver import solve_ols, transition_count

__all__ = [
    "PulseTrain",
    "RandomPiecewise",
    "RectObject",
    "SceneSpec",
    "NoiseSpec",
    "generate_pixel_signal",
    "render_scene",
    "blur_video_mifm",
    "blur_video_pifm",
    "add_noise",
    "recovery_metrics",
    "moving_rectangle_scene",
    "SinglePixelTrial",
    "single_pixel_trial",
]


@dataclass(frozen=True)
class PulseTrain:
    """Square wave alternating ``high`` then ``low``; ``duty`` is the high fraction."""

    high: float = 300.0
    low: float = 295.0
    period: float = 0.1
    duty: float = 0.5
    phase: float = 0.0


@dataclass(frozen=True)
class RandomPiecewise:
    """Random signal with exactly ``transitions`` level changes.

    Change points fall on multiples of ``grid`` bins and every constant run
    lasts at least ``min_dwell`` bins. Successive levels differ by a random
    amount in ``[min_step, max_step]`` with random sign.
    """

    transitions: int = 4
    base: float = 300.0
    min_step: float = 2.0
    max_step: float = 8.0
    min_dwell: int = 16
    grid: int = 8
    seed: int = 0


def generate_pixel_signal(params, duration: float, bins: int, t0: float = 0.0) -> PiecewiseSignal:
    """Build a ground-truth pixel signal over ``[t0, t0 + duration)``."""
    if isinstance(params, PulseTrain):
        if not (params.period > 0 and 0 < params.duty < 1):
            raise SpecError("pulse train needs period > 0 and 0 < duty < 1")
        centres = (np.arange(bins) + 0.5) * (duration / bins)
        phase = np.mod(centres - params.phase, params.period) / params.period
        coeffs = np.where(phase < params.duty, params.high, params.low)
        return PiecewiseSignal(t0, duration, coeffs)
    if isinstance(params, RandomPiecewise):
        return PiecewiseSignal(t0, duration, _random_piecewise(params, bins))
    raise SpecError(f"unknown signal kind {type(params).__name__}")


def _random_piecewise(p: RandomPiecewise, bins: int) -> np.ndarray:
    if p.grid < 1 or bins % p.grid:
        raise SpecError(f"grid {p.grid} must divide {bins} bins")
    if p.transitions < 0 or not 0 < p.min_step <= p.max_step:
        raise SpecError("need transitions >= 0 and 0 < min_step <= max_step")
    cells = bins // p.grid
    dwell = max(1, math.ceil(p.min_dwell / p.grid))
    extra = cells - (p.transitions + 1) * dwell
    if extra < 0:
        raise SpecError(
            f"{p.transitions} transitions with dwell {p.min_dwell} bins do not fit in {bins} bins"
        )
    rng = np.random.default_rng(p.seed)
    # random composition of the spare cells into transitions + 1 runs
    cut = np.sort(rng.choice(extra + p.transitions, size=p.transitions, replace=False))
    spare = np.diff(np.concatenate(([-1], cut, [extra + p.transitions]))) - 1
    runs = (spare + dwell) * p.grid
    steps = rng.uniform(p.min_step, p.max_step, size=p.transitions)
    signs = rng.choice([-1.0, 1.0], size=p.transitions)
    levels = p.base + np.concatenate(([0.0], np.cumsum(steps * signs)))
    return np.repeat(levels, runs)


@dataclass(frozen=True)
class RectObject:
    """Axis-aligned rectangle; position is its top-left corner in pixels at t = 0."""

    x: float
    y: float
    width: float
    height: float
    temp: float
    vx: float = 0.0
    vy: float = 0.0


@dataclass(frozen=True)
class SceneSpec:
    width: int
    height: int
    background_temp: float
    objects: tuple = ()
    duration: float = 0.32
    sample_period: float = 0.005

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ParameterError("scene must be at least 1x1")
        if not self.sample_period > 0 or not self.duration > 0:
            raise ParameterError("duration and sample_period must be positive")
        temps = [self.background_temp] + [o.temp for o in self.objects]
        if not np.all(np.isfinite(temps)):
            raise ParameterError("scene temperatures must be finite")

    @property
    def frame_count(self) -> int:
        return int(round(self.duration / self.sample_period))

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        objs = tuple(RectObject(**o) for o in d.get("objects", ()))
        rest = {k: v for k, v in d.items() if k != "objects"}
        return cls(objects=objs, **rest)

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "background_temp": self.background_temp,
            "objects": [vars(o).copy() for o in self.objects],
            "duration": self.duration,
            "sample_period": self.sample_period,
        }


def render_scene(spec: SceneSpec) -> np.ndarray:
    """Instantaneous steady-state temperature frames, shape (frames, height, width).

    A pixel belongs to an object when its centre lies in the object's
    half-open extent ``[x, x + width) x [y, y + height)``. Objects listed later
    are drawn on top.
    """
    n = spec.frame_count
    frames = np.full((n, spec.height, spec.width), float(spec.background_temp))
    cx = np.arange(spec.width) + 0.5
    cy = np.arange(spec.height) + 0.5
    for f in range(n):
        t = f * spec.sample_period
        for o in spec.objects:
            x0 = o.x + o.vx * t
            y0 = o.y + o.vy * t
            inx = (cx >= x0) & (cx < x0 + o.width)
            iny = (cy >= y0) & (cy < y0 + o.height)
            frames[f][np.ix_(iny, inx)] = o.temp
    return frames


def moving_rectangle_scene(width=64, height=32, frames=64, sample_period=0.005,
                           background=295.0, temp=310.0, size=(10, 8),
                           speed_px_per_frame=1.0) -> SceneSpec:
    """A hot rectangle crossing the frame horizontally at constant speed."""
    w, h = size
    obj = RectObject(x=-w + 4.0, y=(height - h) / 2.0, width=w, height=h, temp=temp,
                     vx=speed_px_per_frame / sample_period)
    return SceneSpec(width, height, background, (obj,), frames * sample_period, sample_period)


def blur_video_mifm(truth, tau: float, sample_period: float, y0_rule: str = "steady-state") -> ThermalVideo:
    """Exact microbolometer response to piecewise-constant truth frames.

    ``y0_rule`` sets the membrane temperature at t = 0: ``"steady-state"``
    starts each pixel in equilibrium with its first truth value;
    ``"first-frame"`` starts every pixel at the spatial mean of the first
    truth frame, as after a uniform shutter calibration.
    """
    truth = np.asarray(truth, dtype=np.float64)
    if truth.ndim != 3 or truth.shape[0] < 1:
        raise ShapeError(f"truth must be (frames, height, width) with >= 1 frame, got {truth.shape}")
    if not tau > 0:
        raise ParameterError(f"tau must be positive, got {tau}")
    if y0_rule == "steady-state":
        y = truth[0].copy()
    elif y0_rule == "first-frame":
        y = np.full(truth.shape[1:], truth[0].mean())
    else:
        raise ParameterError(f"unknown y0_rule {y0_rule!r}")
    decay = math.exp(-sample_period / tau)
    out = np.empty_like(truth)
    out[0] = y
    for f in range(1, truth.shape[0]):
        y = truth[f] + (y - truth[f]) * decay
        out[f] = y
    return ThermalVideo(out.astype(np.float32), sample_period, tau)


def blur_video_pifm(truth, exposure_frames: int, sample_period: float = 0.005) -> ThermalVideo:
    """Exposure-averaging blur: each frame is the mean of the last ``exposure_frames`` truth frames.

    Frames before the start are taken equal to the first frame.
    """
    if exposure_frames < 1:
        raise ParameterError(f"exposure_frames must be at least 1, got {exposure_frames}")
    truth = np.asarray(truth, dtype=np.float64)
    padded = np.concatenate([np.repeat(truth[:1], exposure_frames - 1, axis=0), truth])
    out = np.lib.stride_tricks.sliding_window_view(padded, exposure_frames, axis=0).mean(axis=-1)
    return ThermalVideo(out.astype(np.float32), sample_period)


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ParameterError(f"sigma must be non-negative, got {self.sigma}")


def add_noise(data, noise: NoiseSpec):
    """Add i.i.d. Gaussian noise. Accepts a ThermalVideo or an array."""
    if isinstance(data, ThermalVideo):
        noisy = add_noise(data.frames.astype(np.float64), noise)
        return ThermalVideo(noisy.astype(np.float32), data.sample_period, data.tau)
    arr = np.asarray(data, dtype=np.float64)
    if noise.sigma == 0:
        return arr.copy()
    rng = np.random.default_rng(noise.seed)
    return arr + rng.normal(0.0, noise.sigma, size=arr.shape)


def recovery_metrics(estimate, truth, transition_tol: float = 0.1) -> dict:
    """rmse, max_abs_err, psnr (dB, peak = truth range) and transition_count_delta.

    For arrays with more than one axis the first axis is time and transition
    counts are summed over the remaining positions.
    """
    est = np.asarray(estimate, dtype=np.float64)
    tru = np.asarray(truth, dtype=np.float64)
    if est.shape != tru.shape:
        raise ShapeError(f"estimate shape {est.shape} != truth shape {tru.shape}")
    err = est - tru
    rmse = float(np.sqrt(np.mean(err ** 2)))
    rng = float(tru.max() - tru.min())
    if rng == 0:
        psnr = None
    elif rmse == 0:
        psnr = math.inf
    else:
        psnr = 20.0 * math.log10(rng / rmse)

    def rho(a):
        if a.ndim == 1:
            return transition_count(a, transition_tol)
        return int(np.count_nonzero(np.abs(np.diff(a, axis=0)) > transition_tol))

    return {
        "rmse": rmse,
        "max_abs_err": float(np.max(np.abs(err))),
        "psnr": psnr,
        "transition_count_delta": rho(est) - rho(tru),
    }


@dataclass
class SinglePixelTrial:
    """One simulated pixel window with QP and OLS reconstructions on the bin grid."""

    times: np.ndarray = field(repr=False)
    samples: np.ndarray = field(repr=False)
    truth: PiecewiseSignal
    qp: PiecewiseSignal
    ols: PiecewiseSignal
    converged: bool

    def metrics(self, transition_tol: float = 0.1) -> dict:
        t = self.truth.coeffs
        return {
            "qp_rmse": float(np.sqrt(np.mean((self.qp.coeffs - t) ** 2))),
            "ols_rmse": float(np.sqrt(np.mean((self.ols.coeffs - t) ** 2))),
            "qp_transitions": transition_count(self.qp.coeffs, transition_tol),
            "ols_transitions": transition_count(self.ols.coeffs, transition_tol),
            "truth_transitions": transition_count(t, transition_tol),
        }


def single_pixel_trial(cfg, sigma: float, seed: int, signal: RandomPiecewise | None = None,
                       shared=None) -> SinglePixelTrial:
    """Simulate one pixel window and reconstruct it two ways.

    The truth is a random piecewise-constant signal on the window's bin grid;
    the sensor starts in equilibrium with its first level; Gaussian noise of
    std ``sigma`` is added to all N + 1 samples. ``qp`` comes from
    :func:`pipeline.deblur_pixel`; ``ols`` is the minimum-norm solution of the
    same mean-referenced linear system.
    """
    from .mifm import MeasurementWindow
    from .pipeline import deblur_pixel, precompute_shared

    if shared is None:
        shared = precompute_shared(cfg)
    if signal is None:
        signal = RandomPiecewise(seed=seed)
    else:
        signal = RandomPiecewise(**{**vars(signal), "seed": seed})
    times = shared.times
    truth = generate_pixel_signal(signal, float(times[-1]), cfg.bins)
    clean = simulate_response(truth, truth.coeffs[0], cfg.tau, times)
    samples = add_noise(clean, NoiseSpec(sigma, seed + 1_000_003))
    window = MeasurementWindow(times, samples, cfg.tau)
    qp, _, report = deblur_pixel(window, cfg, shared)
    ref = samples[0]
    ols = ref + solve_ols(shared.v, samples[1:] - ref)
    return SinglePixelTrial(times, samples, truth, qp,
                            PiecewiseSignal(0.0, float(times[-1]), ols), report.converged)
