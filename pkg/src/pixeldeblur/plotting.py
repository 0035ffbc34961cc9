"""Matplotlib figures written next to the CLI's CSV/JSON outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "figure.figsize": (6.0, 3.2),
}


def _steps(signal):
    edges = signal.breakpoints() * 1e3
    return edges, np.append(signal.coeffs, signal.coeffs[-1])


def plot_pixel_trace(times, samples, path, qp=None, ols=None, truth=None, title=None):
    """Samples as markers, reconstructions as step curves; time axis in ms."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        if truth is not None:
            ax.step(*_steps(truth), where="post", color="k", lw=1.6, label="truth")
        if ols is not None:
            ax.step(*_steps(ols), where="post", color="tab:orange", lw=0.9, label="OLS")
        if qp is not None:
            ax.step(*_steps(qp), where="post", color="tab:blue", lw=1.2, label="QP (LASSO)")
        ax.plot(np.asarray(times) * 1e3, samples, "o", ms=3.5, color="tab:red", label="measured")
        ax.set_xlabel("time (ms)")
        ax.set_ylabel("temperature (K)")
        if title:
            ax.set_title(title)
        ax.legend(frameon=False, ncol=2)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def plot_pulse_response(truth, times, response, path):
    """Square-wave input against the simulated sensor response."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.step(*_steps(truth), where="post", color="k", lw=1.2, label="input")
        ax.plot(np.asarray(times) * 1e3, response, color="tab:red", lw=1.2, label="sensor")
        ax.set_xlabel("time (ms)")
        ax.set_ylabel("temperature (K)")
        ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def plot_frames(panels, path, vmin=None, vmax=None):
    """Side-by-side grayscale frames; ``panels`` is a list of ``(title, frame)``."""
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(panels), figsize=(2.4 * len(panels), 1.9), squeeze=False)
        for ax, (title, frame) in zip(axes[0], panels):
            ax.imshow(frame, cmap="gray", vmin=vmin, vmax=vmax, interpolation="nearest")
            ax.set_title(title)
            ax.set_axis_off()
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
