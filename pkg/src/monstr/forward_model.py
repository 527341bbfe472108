"""Longitudinal-ray-transform measurement model for strain sinograms.

A ray at angle theta measures the strain tensor contracted twice with its
direction, so each view contributes the weight row
[cos^2 theta, sin^2 theta, sin 2 theta] applied to the per-component ray
transforms. Measurements are kept path-length scaled (y = <eps> * L);
the per-ray average strain is y / L on valid rays.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from monstr.core import Geometry, GeometryError, ShapeMask, StrainSinogram, TensorField2D
from monstr.elasticity import ElasticityModel
from monstr.projector import Projector


@dataclass(frozen=True)
class RayWeights:
    """Per-view direction weights w and their stress-domain counterpart.

    w_tilde = w C^-1 re-expresses the forward model in terms of stress
    virtual sinograms: y_i = w_i p_i = w_tilde_i p_tilde_i.
    """

    w: np.ndarray        # (num_views, 3)
    w_tilde: np.ndarray  # (num_views, 3)

    def __post_init__(self):
        for name in ("w", "w_tilde"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def compute_weights(angles, model: ElasticityModel) -> RayWeights:
    """Weight rows [cos^2, sin^2, sin 2theta] per view, and w_tilde = w C^-1."""
    angles = np.asarray(angles, dtype=np.float64)
    cos_t = np.cos(angles)
    sin_t = np.sin(angles)
    w = np.stack([cos_t * cos_t, sin_t * sin_t, np.sin(2.0 * angles)], axis=1)
    return RayWeights(w=w, w_tilde=w @ model.stiffness_inv)


def synthesize_strain_sinogram(
    strain: TensorField2D, mask: ShapeMask, projector: Projector,
    model: ElasticityModel,
) -> StrainSinogram:
    """Forward-model a strain tensor field into a measured strain sinogram."""
    geom = projector.geometry
    if not strain.geometry.grid_compatible(geom):
        raise GeometryError("strain field grid does not match projector")
    if not mask.geometry.grid_compatible(geom):
        raise GeometryError("mask grid does not match projector")
    weights = compute_weights(geom.angles, model)
    masked = strain.as_array() * mask.values
    p = projector.project_stack(masked)  # (3, views, det)
    y = np.einsum("vk,kvd->vd", weights.w, p)
    lengths = projector.path_lengths(mask)
    return StrainSinogram(geom, y, lengths)


def add_noise(sinogram: StrainSinogram, sigma_microstrain, seed) -> StrainSinogram:
    """Add white Gaussian noise of the given std (in microstrain) to <eps>.

    Noise lives in strain units on the physically measured per-ray average;
    the stored y picks up sigma * 1e-6 * L per ray. Deterministic for a
    fixed seed; sigma = 0 returns an identical sinogram.
    """
    sigma = float(sigma_microstrain)
    if sigma < 0.0:
        raise ValueError("noise std must be non-negative")
    if sigma == 0.0:
        return sinogram
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(sinogram.geometry.sinogram_shape)
    y = sinogram.y + sigma * 1e-6 * noise * sinogram.path_lengths
    return StrainSinogram(sinogram.geometry, y, sinogram.path_lengths)


def subsample_views(sinogram: StrainSinogram, keep) -> StrainSinogram:
    """Keep `keep` views, uniformly strided by index starting at view 0."""
    num_views = sinogram.geometry.num_views
    keep = int(keep)
    if not 1 <= keep <= num_views:
        raise ValueError(f"keep must be in [1, {num_views}], got {keep}")
    idx = (np.arange(keep) * num_views) // keep
    geom = sinogram.geometry
    new_geom = Geometry(
        geom.grid_rows, geom.grid_cols, geom.angles[idx], geom.num_detector_cols
    )
    return StrainSinogram(new_geom, sinogram.y[idx], sinogram.path_lengths[idx])
