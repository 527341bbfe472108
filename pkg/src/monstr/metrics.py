"""Masked NRMSE reporting against ground truth."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from monstr.core import GeometryError, ScalarField, ShapeMask, TensorField2D


@dataclass(frozen=True)
class TensorNrmse:
    xx: float
    yy: float
    xy: float
    total: float

    def as_dict(self):
        return {"xx": self.xx, "yy": self.yy, "xy": self.xy, "total": self.total}


def _check_grids(estimate, truth, mask):
    if not (
        estimate.geometry.grid_compatible(truth.geometry)
        and estimate.geometry.grid_compatible(mask.geometry)
    ):
        raise GeometryError(
            f"grid mismatch: estimate {estimate.geometry.grid_shape}, "
            f"truth {truth.geometry.grid_shape}, mask {mask.geometry.grid_shape}"
        )


def _masked_ratio(diff, truth, inside):
    num = float(np.sqrt(np.sum(diff[..., inside] ** 2)))
    den = float(np.sqrt(np.sum(truth[..., inside] ** 2)))
    if den == 0.0:
        raise ValueError("ground truth has zero norm over the mask")
    return num / den


def nrmse(estimate, truth, mask: ShapeMask):
    """||(estimate - truth) * m|| / ||truth * m||.

    Scalar fields give a float; tensor fields give a TensorNrmse with the
    per-component values and the total over all three stacked components.
    """
    if isinstance(estimate, ScalarField) and isinstance(truth, ScalarField):
        _check_grids(estimate, truth, mask)
        inside = mask.as_bool
        return _masked_ratio(estimate.values, truth.values, inside)
    if isinstance(estimate, TensorField2D) and isinstance(truth, TensorField2D):
        _check_grids(estimate, truth, mask)
        inside = mask.as_bool
        est = estimate.as_array()
        tru = truth.as_array()
        return TensorNrmse(
            xx=_masked_ratio(est[0] - tru[0], tru[0], inside),
            yy=_masked_ratio(est[1] - tru[1], tru[1], inside),
            xy=_masked_ratio(est[2] - tru[2], tru[2], inside),
            total=_masked_ratio(est - tru, tru, inside),
        )
    raise TypeError("estimate and truth must both be ScalarField or both TensorField2D")


def error_field(estimate, truth, scale=1.0):
    """scale * (estimate - truth), for rendering error images."""
    if type(estimate) is not type(truth):
        raise TypeError("estimate and truth must share a type")
    if not estimate.geometry.grid_compatible(truth.geometry):
        raise GeometryError(
            f"grid mismatch: estimate {estimate.geometry.grid_shape} vs "
            f"truth {truth.geometry.grid_shape}"
        )
    if isinstance(estimate, ScalarField):
        return ScalarField(estimate.geometry, scale * (estimate.values - truth.values))
    if isinstance(estimate, TensorField2D):
        return TensorField2D.from_array(
            estimate.geometry, scale * (estimate.as_array() - truth.as_array())
        )
    raise TypeError("expected ScalarField or TensorField2D")
