"""Cantilevered-beam ground truth and the canonical experiment list.

The strain field is the Saint-Venant end-loaded beam evaluated at pixel
centers in beam-local coordinates (x in [0, l] along the long axis,
y in [-h/2, h/2] across it):

    eps_xx = (P /  E I) (l - x) y
    eps_yy = -((1 + nu) P / (2 E I)) ((h/2)^2 - y^2)
    eps_xy = -nu * eps_xx

The beam is a 45 x 91 pixel rectangle centered in a 128 x 128 field of
view, long axis along x. The load P is set so the peak |eps_xx| of the
continuous field equals the requested peak strain.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from monstr.core import Geometry, GeometryError, ShapeMask, TensorField2D


@dataclass(frozen=True)
class BeamPhantomParams:
    length: int = 91                      # pixels along x
    width: int = 45                       # pixels along y
    youngs_modulus: float = 1.0
    poisson_ratio: float = 0.3
    peak_strain_microstrain: float = 300.0

    @property
    def second_moment(self):
        return self.width ** 3 / 12.0

    @property
    def load(self):
        # Peak |eps_xx| of the continuous field sits at (x=0, |y|=h/2).
        e_i = self.youngs_modulus * self.second_moment
        return (
            self.peak_strain_microstrain * 1e-6 * e_i
            / (self.length * (self.width / 2.0))
        )


def cantilever_strain_at(params: BeamPhantomParams, x, y):
    """Evaluate the continuous strain field at beam-local (x, y).

    Returns (eps_xx, eps_yy, eps_xy) arrays broadcast over the inputs.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    k = params.load / (params.youngs_modulus * params.second_moment)
    half_h = params.width / 2.0
    exx = k * (params.length - x) * y
    eyy = -0.5 * k * (1.0 + params.poisson_ratio) * (half_h * half_h - y * y)
    exy = -params.poisson_ratio * exx
    return exx, eyy, exy


def cantilever_strain(params: BeamPhantomParams, geometry: Geometry):
    """Sample the beam strain at pixel centers; returns (TensorField2D, ShapeMask)."""
    rows, cols = geometry.grid_shape
    if params.width > rows or params.length > cols:
        raise GeometryError(
            f"beam {params.width}x{params.length} does not fit in grid {rows}x{cols}"
        )
    row0 = (rows - params.width) // 2
    col0 = (cols - params.length) // 2

    mask = np.zeros((rows, cols))
    mask[row0:row0 + params.width, col0:col0 + params.length] = 1.0

    r = np.arange(row0, row0 + params.width, dtype=np.float64)
    c = np.arange(col0, col0 + params.length, dtype=np.float64)
    y_local = (r + 0.5) - (row0 + params.width / 2.0)
    x_local = (c + 0.5) - col0
    exx, eyy, exy = cantilever_strain_at(
        params, x_local[None, :], y_local[:, None]
    )

    stacked = np.zeros((3, rows, cols))
    stacked[0, row0:row0 + params.width, col0:col0 + params.length] = exx
    stacked[1, row0:row0 + params.width, col0:col0 + params.length] = eyy
    stacked[2, row0:row0 + params.width, col0:col0 + params.length] = exy
    return TensorField2D.from_array(geometry, stacked), ShapeMask(geometry, mask)


@dataclass(frozen=True)
class ExperimentSpec:
    """One canonical run: which sinogram variant feeds which solver flavor."""

    name: str
    keep_views: int | None          # None = all acquired views
    noise_microstrain: float
    enable_equilibrium: bool


def reference_experiments():
    """The four canonical runs reported by the reconstruction study."""
    return [
        ExperimentSpec("baseline-50", None, 0.0, False),
        ExperimentSpec("monstr-50", None, 0.0, True),
        ExperimentSpec("monstr-10", 10, 0.0, True),
        ExperimentSpec("monstr-50-noisy", None, 10.0, True),
    ]
