"""Plane-stress linear elasticity: stiffness matrix and strain/stress maps.

Component order everywhere is (xx, yy, xy). The shear channel uses the
tensor-shear convention: the stiffness entry is E(1-nu)/(1-nu^2) with no
factor-of-2 adjustment, and its exact inverse entry is (1+nu)/E, so the
forward and inverse maps are mutually consistent by construction.

Young's modulus is normalized to 1 by default: reconstructions and all
error metrics are invariant to a global stress rescaling.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from monstr.core import TensorField2D


def stiffness_matrix(youngs_modulus, poisson_ratio):
    """3x3 plane-stress stiffness: E/(1-nu^2) * [[1, nu, 0], [nu, 1, 0], [0, 0, 1-nu]]."""
    e, nu = float(youngs_modulus), float(poisson_ratio)
    if e <= 0.0:
        raise ValueError("Young's modulus must be positive")
    if not -1.0 < nu < 0.5:
        raise ValueError("Poisson ratio must lie in (-1, 0.5)")
    scale = e / (1.0 - nu * nu)
    return scale * np.array(
        [[1.0, nu, 0.0], [nu, 1.0, 0.0], [0.0, 0.0, 1.0 - nu]]
    )


def _stiffness_inverse(youngs_modulus, poisson_ratio):
    # Closed form: block inverse of the 2x2 plus the scalar shear entry.
    e, nu = float(youngs_modulus), float(poisson_ratio)
    return (1.0 / e) * np.array(
        [[1.0, -nu, 0.0], [-nu, 1.0, 0.0], [0.0, 0.0, 1.0 + nu]]
    )


@dataclass(frozen=True)
class ElasticityModel:
    youngs_modulus: float
    poisson_ratio: float
    stiffness: np.ndarray
    stiffness_inv: np.ndarray

    @classmethod
    def from_constants(cls, youngs_modulus=1.0, poisson_ratio=0.3):
        c = stiffness_matrix(youngs_modulus, poisson_ratio)
        c_inv = _stiffness_inverse(youngs_modulus, poisson_ratio)
        c.setflags(write=False)
        c_inv.setflags(write=False)
        return cls(float(youngs_modulus), float(poisson_ratio), c, c_inv)


def apply_matrix(matrix, stacked):
    """Per-entry 3-vector map: (3,3) matrix applied along the leading axis."""
    return np.einsum("ab,b...->a...", matrix, stacked)


def strain_to_stress(strain: TensorField2D, model: ElasticityModel) -> TensorField2D:
    """Hooke's law per pixel: sigma = C eps."""
    out = apply_matrix(model.stiffness, strain.as_array())
    return TensorField2D.from_array(strain.geometry, out)


def stress_to_strain(stress: TensorField2D, model: ElasticityModel) -> TensorField2D:
    """Inverse Hooke map per pixel: eps = C^-1 sigma."""
    out = apply_matrix(model.stiffness_inv, stress.as_array())
    return TensorField2D.from_array(stress.geometry, out)
