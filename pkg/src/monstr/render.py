"""Raster output of fields as portable pixmaps (PGM/PPM), dependency-free.

Values are scaled, linearly mapped from a [lo, hi] range to 0..255, and
written either as 8-bit grayscale (P5) or through the diverging colormap
table shipped as package data (P6). Byte output is deterministic for
fixed inputs.
"""
from __future__ import annotations

import json
from importlib import resources

import numpy as np

from monstr.core import MonstrError


class RenderError(MonstrError):
    """Unrenderable field or bad render arguments."""


def _load_colormap():
    ref = resources.files("monstr.data").joinpath("colormap_diverging.json")
    table = json.loads(ref.read_text(encoding="utf-8"))
    return np.asarray(table, dtype=np.uint8)


def to_levels(values, value_range, scale=1.0):
    """Map scale*values linearly from [lo, hi] to integer levels 0..255."""
    lo, hi = float(value_range[0]), float(value_range[1])
    if not hi > lo:
        raise RenderError(f"range must satisfy lo < hi, got ({lo}, {hi})")
    arr = np.asarray(values, dtype=np.float64) * float(scale)
    if not np.all(np.isfinite(arr)):
        raise RenderError("field contains non-finite values")
    t = (arr - lo) / (hi - lo)
    return np.clip(np.floor(t * 255.0 + 0.5), 0.0, 255.0).astype(np.uint8)


def symmetric_range(values, scale=1.0):
    """(-m, m) with m = max |scale * values| (1e-30 floor for flat fields)."""
    m = float(np.max(np.abs(np.asarray(values) * scale)))
    m = max(m, 1e-30)
    return (-m, m)


def write_pgm(path, levels):
    levels = np.asarray(levels, dtype=np.uint8)
    rows, cols = levels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
        fh.write(levels.tobytes())


def write_ppm(path, levels, colormap):
    levels = np.asarray(levels, dtype=np.uint8)
    rows, cols = levels.shape
    rgb = colormap[levels]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{cols} {rows}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(rgb, dtype=np.uint8).tobytes())


def render_field(values, out_path, value_range=None, scale=1.0, colormap="diverging"):
    """Render a 2D value array to `out_path`; returns the range used."""
    if value_range is None:
        value_range = symmetric_range(values, scale)
    levels = to_levels(values, value_range, scale)
    if colormap == "gray":
        write_pgm(out_path, levels)
    elif colormap == "diverging":
        write_ppm(out_path, levels, _load_colormap())
    else:
        raise RenderError(f"unknown colormap {colormap!r}")
    return value_range
