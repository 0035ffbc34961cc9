"""File formats: the TIRV video container, 16-bit PGM frames and CSV traces.

TIRV layout (all little-endian)::

    offset  size  field
    0       4     magic b"TIRV"
    4       4     version (u32) = 1
    8       4     width (u32)
    12      4     height (u32)
    16      4     frame_count (u32)
    20      8     sample_period_s (f64)
    28      8     tau_s (f64), written as 0 when unknown
    36      ...   frame_count * height * width f32 Kelvin, frame-major, row-major
"""

from __future__ import annotations

import csv
import math
import struct
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    LengthMismatchError,
    ShapeError,
    TruncatedPayloadError,
    UnsupportedVersionError,
    WindowError,
)
from .pipeline import ThermalVideo

__all__ = [
    "read_tirv",
    "write_tirv",
    "encode_tirv",
    "decode_tirv",
    "export_frame_pgm",
    "read_pgm16",
    "export_pixel_trace_csv",
    "write_trace_table",
]

MAGIC = b"TIRV"
VERSION = 1
_HEADER = struct.Struct("<4sIIIIdd")
HEADER_SIZE = _HEADER.size


def encode_tirv(video: ThermalVideo, tau: float | None = None) -> bytes:
    if tau is None:
        tau = video.tau if video.tau is not None else 0.0
    header = _HEADER.pack(MAGIC, VERSION, video.width, video.height, video.frame_count,
                          float(video.sample_period), float(tau))
    return header + np.ascontiguousarray(video.frames, dtype="<f4").tobytes()


def decode_tirv(data: bytes) -> ThermalVideo:
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagicError(f"bad magic {data[:4]!r}, expected {MAGIC!r}")
    if len(data) < HEADER_SIZE:
        raise TruncatedPayloadError(f"truncated header: {len(data)} of {HEADER_SIZE} bytes")
    _, version, width, height, frames, period, tau = _HEADER.unpack_from(data)
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported TIRV version {version}")
    expected = 4 * width * height * frames
    got = len(data) - HEADER_SIZE
    if got < expected:
        raise TruncatedPayloadError(f"truncated payload: {got} of {expected} bytes")
    if got > expected:
        raise LengthMismatchError(
            f"payload is {got} bytes but header declares {width}x{height}x{frames} ({expected} bytes)"
        )
    arr = np.frombuffer(data, dtype="<f4", offset=HEADER_SIZE).reshape(frames, height, width)
    return ThermalVideo(arr.astype(np.float32), period, tau)


def read_tirv(path) -> ThermalVideo:
    return decode_tirv(Path(path).read_bytes())


def write_tirv(video: ThermalVideo, path, tau: float | None = None) -> None:
    Path(path).write_bytes(encode_tirv(video, tau))


def export_frame_pgm(frame, window, path) -> None:
    """Write ``frame`` as a binary 16-bit PGM.

    Temperatures map linearly from ``window = (lo, hi)`` Kelvin onto
    0..65535 with round-half-up and clamping. The window is stored in a
    comment line so the mapping can be inverted.
    """
    lo, hi = (float(v) for v in window)
    if not lo < hi:
        raise WindowError(f"window min {lo} must be below max {hi}")
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != 2:
        raise ShapeError(f"frame must be 2-D, got shape {frame.shape}")
    scaled = np.floor((frame - lo) / (hi - lo) * 65535.0 + 0.5)
    pixels = np.clip(scaled, 0, 65535).astype(">u2")
    h, w = frame.shape
    header = f"P5\n# window_k {lo!r} {hi!r}\n{w} {h}\n65535\n".encode("ascii")
    Path(path).write_bytes(header + pixels.tobytes())


def read_pgm16(path):
    """Read a binary 16-bit PGM; returns ``(pixels uint16 (h, w), comments)``."""
    data = Path(path).read_bytes()
    tokens = []
    comments = []
    pos = 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            end = data.index(b"\n", pos)
            comments.append(data[pos + 1:end].decode("ascii").strip())
            pos = end + 1
            continue
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos].decode("ascii"))
    pos += 1  # single whitespace before the raster
    if tokens[0] != "P5" or int(tokens[3]) != 65535:
        raise ValueError("not a 16-bit binary PGM")
    w, h = int(tokens[1]), int(tokens[2])
    pixels = np.frombuffer(data, dtype=">u2", count=w * h, offset=pos).reshape(h, w)
    return pixels.astype(np.uint16), comments


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    # 9 significant digits round-trip any float32
    return "%.9g" % float(np.float32(v))


def export_pixel_trace_csv(video: ThermalVideo, pixel, path) -> None:
    """Write ``time,value`` rows for one pixel; ``pixel`` is ``(row, col)``."""
    r, c = pixel
    if not (0 <= r < video.height and 0 <= c < video.width):
        raise IndexError(f"pixel {pixel} outside {video.height}x{video.width} frame")
    series = video.frames[:, r, c]
    write_trace_table(video.times(), {"value": series}, path)


def write_trace_table(times, columns: dict, path) -> None:
    """CSV with a ``time`` column followed by ``columns``; missing values are blank."""
    times = np.asarray(times, dtype=np.float64)
    names = list(columns)
    cols = [np.asarray(columns[n], dtype=np.float64) for n in names]
    for n, col in zip(names, cols):
        if col.shape != times.shape:
            raise ShapeError(f"column {n!r} has shape {col.shape}, times {times.shape}")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["time"] + names)
        for i, t in enumerate(times):
            writer.writerow([repr(float(t))] + [_fmt(col[i]) for col in cols])
