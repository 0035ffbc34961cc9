"""Command-line front end.

Subcommands::

    simulate  scene JSON -> truth TIRV + blurred TIRV (+ optional figure)
    deblur    TIRV -> deblurred TIRV + diagnostics JSON
    eval      estimate TIRV vs truth TIRV -> metrics JSON
    trace     single-pixel deblur -> CSV of samples, OLS, QP, truth (+ figure)
    export    one TIRV frame -> 16-bit PGM

Failures exit with status 2 and print one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io as tio
from .errors import DeblurError
from .mifm import MeasurementWindow, PiecewiseSignal
from .pipeline import DeblurConfig, ThermalVideo, default_workers, deblur_pixel, precompute_shared, run_deblur
from .solver import solve_ols
from .synth import (
    NoiseSpec,
    RandomPiecewise,
    SceneSpec,
    add_noise,
    blur_video_mifm,
    blur_video_pifm,
    recovery_metrics,
    render_scene,
    single_pixel_trial,
)

log = logging.getLogger("pixeldeblur")

_CFG_FLAGS = {
    "n_window": int,
    "resolution_exp": int,
    "lam": float,
    "tau": float,
    "sample_period": float,
    "transition_tol": float,
    "output_rule": str,
    "max_iters": int,
    "tol": float,
}


def _load_json(path):
    if path is None:
        return {}
    with open(path) as fh:
        return json.load(fh)


def _emit(obj, path=None):
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path:
        Path(path).write_text(text + "\n")
    print(text)


def _add_cfg_flags(p):
    p.add_argument("--config", help="JSON file with deblur settings; flags override it")
    for name, typ in _CFG_FLAGS.items():
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None)


def _deblur_config(args, video: ThermalVideo | None = None) -> DeblurConfig:
    values = {k: v for k, v in _load_json(args.config).items() if k in _CFG_FLAGS}
    if video is not None:
        values["sample_period"] = video.sample_period
        if video.tau:
            values.setdefault("tau", video.tau)
    for name in _CFG_FLAGS:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    return DeblurConfig(**values)


def cmd_simulate(args):
    raw = _load_json(args.scene)
    tau = raw.pop("tau", 0.011)
    sigma = raw.pop("sigma", 0.0)
    seed = raw.pop("seed", 0)
    y0_rule = raw.pop("y0_rule", "steady-state")
    for key in ("duration", "sample_period"):
        if getattr(args, key) is not None:
            raw[key] = getattr(args, key)
    tau = args.tau if args.tau is not None else tau
    sigma = args.sigma if args.sigma is not None else sigma
    seed = args.seed if args.seed is not None else seed
    spec = SceneSpec.from_dict(raw)

    truth = render_scene(spec)
    blurred = blur_video_mifm(truth, tau, spec.sample_period, args.y0_rule or y0_rule)
    blurred = add_noise(blurred, NoiseSpec(sigma, seed))
    tio.write_tirv(ThermalVideo(truth.astype(np.float32), spec.sample_period, tau), args.truth)
    tio.write_tirv(blurred, args.blurred)
    if args.figure:
        from .plotting import plot_frames

        f = spec.frame_count // 2
        pifm = blur_video_pifm(truth, max(1, int(round(5 * tau / spec.sample_period))), spec.sample_period)
        plot_frames(
            [("scene", truth[f]), ("exposure average", pifm.frames[f]), ("microbolometer", blurred.frames[f])],
            args.figure,
            vmin=float(truth.min()),
            vmax=float(truth.max()),
        )
    _emit({"frames": spec.frame_count, "width": spec.width, "height": spec.height,
           "tau": tau, "sigma": sigma, "truth": str(args.truth), "blurred": str(args.blurred)})


def cmd_deblur(args):
    video = tio.read_tirv(args.input)
    cfg = _deblur_config(args, video)
    workers = args.workers if args.workers is not None else default_workers()
    out, diag = run_deblur(video, cfg, workers)
    tio.write_tirv(out, args.output, cfg.tau)
    report = diag.as_dict()
    report["config"] = dataclasses.asdict(cfg)
    report["first_input_frame"] = cfg.n_window
    _emit(report, args.diagnostics)


def _align(est: ThermalVideo, truth: ThermalVideo):
    if est.frame_count > truth.frame_count or est.frames.shape[1:] != truth.frames.shape[1:]:
        raise DeblurError(
            f"estimate {est.frames.shape} cannot be aligned with truth {truth.frames.shape}"
        )
    # deblurred videos drop the first N frames; align on the end
    return truth.frames[truth.frame_count - est.frame_count:]


def cmd_eval(args):
    est = tio.read_tirv(args.estimate)
    truth = tio.read_tirv(args.truth)
    tr = _align(est, truth)
    out = {"estimate": recovery_metrics(est.frames, tr, args.transition_tol)}
    if args.blurred:
        bl = tio.read_tirv(args.blurred)
        out["blurred"] = recovery_metrics(bl.frames[bl.frame_count - est.frame_count:], tr,
                                          args.transition_tol)
    _emit(out, args.metrics)


def cmd_trace(args):
    cfg = _deblur_config(args)
    shared = precompute_shared(cfg)
    if args.synthetic:
        trial = single_pixel_trial(cfg, args.sigma, args.seed, RandomPiecewise(), shared)
        times, samples, truth, qp, ols = trial.times, trial.samples, trial.truth, trial.qp, trial.ols
        summary = trial.metrics(cfg.transition_tol)
        summary["converged"] = trial.converged
    else:
        if args.input is None or args.pixel is None:
            raise DeblurError("trace needs --input and --pixel, or --synthetic")
        video = tio.read_tirv(args.input)
        cfg = _deblur_config(args, video)
        shared = precompute_shared(cfg)
        r, c = args.pixel
        if not (0 <= r < video.height and 0 <= c < video.width):
            raise IndexError(f"pixel {(r, c)} outside {video.height}x{video.width} frame")
        end = args.frame if args.frame is not None else video.frame_count - 1
        start = end - cfg.n_window
        if start < 0 or end >= video.frame_count:
            raise DeblurError(f"frame {end} has no full window of {cfg.n_window + 1} samples")
        times = video.times()[start:end + 1]
        samples = video.frames[start:end + 1, r, c].astype(np.float64)
        qp, value, report = deblur_pixel(MeasurementWindow(times, samples, cfg.tau), cfg, shared)
        ref = samples[0]
        ols = PiecewiseSignal(qp.t0, qp.dt_total, ref + solve_ols(shared.v, samples[1:] - ref))
        truth = None
        if args.truth:
            tv = tio.read_tirv(args.truth)
            # frame f drives the interval ending at its timestamp
            tvals = tv.frames[start + 1:end + 1, r, c].astype(np.float64)
            idx = np.minimum((np.arange(cfg.bins) * cfg.n_window) // cfg.bins, cfg.n_window - 1)
            truth = PiecewiseSignal(qp.t0, qp.dt_total, tvals[idx])
        summary = {"value": value, "converged": report.converged, "iterations": report.iterations}

    bin_t = qp.breakpoints()[:-1]
    all_t = np.union1d(times, bin_t)
    col = {}
    col["y"] = np.where(np.isin(all_t, times), np.interp(all_t, times, samples), np.nan)
    inside = all_t < qp.t_end
    for name, sig in (("ols", ols), ("qp", qp), ("truth", truth)):
        if sig is None:
            continue
        k = np.minimum(((all_t - sig.t0) * sig.size / sig.dt_total).astype(int), sig.size - 1)
        col[name] = np.where(inside, sig.coeffs[np.clip(k, 0, sig.size - 1)], np.nan)
    if args.csv:
        tio.write_trace_table(all_t, col, args.csv)
    if args.figure:
        from .plotting import plot_pixel_trace

        plot_pixel_trace(times, samples, args.figure, qp=qp, ols=ols, truth=truth)
    _emit(summary)


def cmd_export(args):
    video = tio.read_tirv(args.input)
    f = args.frame
    if not -video.frame_count <= f < video.frame_count:
        raise IndexError(f"frame {f} outside 0..{video.frame_count - 1}")
    frame = video.frames[f]
    window = args.window if args.window else (float(frame.min()), float(frame.max()))
    if args.output.endswith(".csv"):
        raise DeblurError("export writes PGM; use trace for CSV")
    tio.export_frame_pgm(frame, window, args.output)
    if args.trace_pixel is not None:
        if not args.trace_csv:
            raise DeblurError("--trace-pixel needs --trace-csv")
        tio.export_pixel_trace_csv(video, args.trace_pixel, args.trace_csv)
    _emit({"frame": f, "window": list(window), "output": args.output})


def build_parser():
    parser = argparse.ArgumentParser(prog="pixeldeblur", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="render a scene and simulate the sensor")
    p.add_argument("--scene", required=True, help="SceneSpec JSON")
    p.add_argument("--truth", required=True)
    p.add_argument("--blurred", required=True)
    p.add_argument("--tau", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--duration", type=float)
    p.add_argument("--sample-period", dest="sample_period", type=float)
    p.add_argument("--y0-rule", dest="y0_rule", choices=["steady-state", "first-frame"])
    p.add_argument("--figure", help="PNG comparing exposure-average and microbolometer blur")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("deblur", help="deblur a TIRV video")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--diagnostics", help="write diagnostics JSON here as well as stdout")
    p.add_argument("--workers", type=int)
    _add_cfg_flags(p)
    p.set_defaults(func=cmd_deblur)

    p = sub.add_parser("eval", help="compare an estimate with ground truth")
    p.add_argument("--estimate", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--blurred", help="also score this (blurred) video on the same frames")
    p.add_argument("--metrics")
    p.add_argument("--transition-tol", dest="transition_tol", type=float, default=0.1)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("trace", help="deblur one pixel window and dump its traces")
    p.add_argument("--input")
    p.add_argument("--truth")
    p.add_argument("--pixel", type=int, nargs=2, metavar=("ROW", "COL"))
    p.add_argument("--frame", type=int, help="last frame of the window (default: last)")
    p.add_argument("--synthetic", action="store_true", help="simulate a random 4-transition pixel")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma", type=float, default=0.5)
    p.add_argument("--csv")
    p.add_argument("--figure")
    _add_cfg_flags(p)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("export", help="write one frame as 16-bit PGM")
    p.add_argument("--input", required=True)
    p.add_argument("--frame", type=int, default=-1)
    p.add_argument("--window", type=float, nargs=2, metavar=("MIN_K", "MAX_K"))
    p.add_argument("--output", required=True)
    p.add_argument("--trace-pixel", dest="trace_pixel", type=int, nargs=2, metavar=("ROW", "COL"))
    p.add_argument("--trace-csv", dest="trace_csv")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (DeblurError, OSError, IndexError, json.JSONDecodeError, TypeError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
