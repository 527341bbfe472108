"""Shared containers: grid geometry, scalar/tensor fields, sinograms, file I/O.

Axis convention used across the whole package: x increases with column
index, y increases with row index, and projection angles are measured
from the +x axis. All lengths are in pixel units (pixel pitch is 1).

Strain values are stored as dimensionless reals; microstrain (1e-6) only
appears at I/O and reporting boundaries.

The on-disk field format ("MFLD") is a single UTF-8 JSON header line
followed by a raw little-endian float64 payload, row-major, one plane per
component. Tensor planes are ordered xx, yy, xy; sinogram planes are the
path-length scaled measurements y, the path lengths L, and the validity
mask.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

# Rays with a shorter in-sample path are treated as not intersecting the
# sample: the per-ray average strain y/L is undefined as L -> 0.
L_MIN = 1e-6

MFLD_MAGIC = "MFLD1"


class MonstrError(Exception):
    """Base class for package errors."""


class ConfigError(MonstrError):
    """Invalid or inconsistent run configuration."""


class GeometryError(MonstrError):
    """Mismatched or invalid geometry/shapes."""


class MfldError(MonstrError):
    """Corrupt or inconsistent MFLD file."""


class DivergenceError(MonstrError):
    """Solver state became non-finite."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


def _frozen_array(values, dtype=np.float64):
    out = np.ascontiguousarray(values, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Geometry:
    """Acquisition geometry: pixel grid plus parallel-beam view set.

    The detector has one column per ray, pitch 1 pixel, and is centered on
    the grid center.
    """

    grid_rows: int
    grid_cols: int
    angles: np.ndarray  # radians, strictly increasing, in [0, pi)
    num_detector_cols: int
    pixel_pitch: float = 1.0

    def __post_init__(self):
        angles = _frozen_array(self.angles)
        object.__setattr__(self, "angles", angles)
        if self.grid_rows < 1 or self.grid_cols < 1 or self.num_detector_cols < 1:
            raise GeometryError("grid and detector extents must be positive")
        if angles.ndim != 1 or angles.size < 1:
            raise GeometryError("angles must be a non-empty 1D array")
        if not np.all(np.isfinite(angles)):
            raise GeometryError("angles must be finite")
        if np.any(angles < 0.0) or np.any(angles >= np.pi):
            raise GeometryError("angles must lie in [0, pi)")
        if angles.size > 1 and not np.all(np.diff(angles) > 0):
            raise GeometryError("angles must be strictly increasing")
        if self.pixel_pitch != 1.0:
            raise GeometryError("pixel pitch is fixed at 1 pixel unit")

    @property
    def num_views(self):
        return int(self.angles.size)

    @property
    def num_rays(self):
        return self.num_views * self.num_detector_cols

    @property
    def grid_shape(self):
        return (self.grid_rows, self.grid_cols)

    @property
    def sinogram_shape(self):
        return (self.num_views, self.num_detector_cols)

    def __eq__(self, other):
        if not isinstance(other, Geometry):
            return NotImplemented
        return (
            self.grid_rows == other.grid_rows
            and self.grid_cols == other.grid_cols
            and self.num_detector_cols == other.num_detector_cols
            and self.angles.shape == other.angles.shape
            and np.array_equal(self.angles, other.angles)
        )

    def grid_compatible(self, other):
        """Same pixel grid; view sets may differ (e.g. after subsampling)."""
        return (
            self.grid_rows == other.grid_rows and self.grid_cols == other.grid_cols
        )

    def __hash__(self):
        return hash(
            (self.grid_rows, self.grid_cols, self.num_detector_cols, self.angles.tobytes())
        )


def uniform_angles(num_views):
    """`num_views` angles uniformly spanning [0, pi), starting at 0."""
    if num_views < 1:
        raise GeometryError("num_views must be >= 1")
    return np.arange(num_views) * (np.pi / num_views)


def default_geometry(grid_rows=128, grid_cols=128, num_views=50, num_detector_cols=128):
    """Reference configuration: 128x128 grid, 50 views over [0, 180), 128 columns."""
    return Geometry(grid_rows, grid_cols, uniform_angles(num_views), num_detector_cols)


def _check_grid_values(geometry, values, what):
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape != geometry.grid_shape:
        raise GeometryError(
            f"{what} shape {arr.shape} does not match grid {geometry.grid_shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} contains non-finite values")
    return arr


@dataclass(frozen=True, eq=False)
class ScalarField:
    """One scalar component field on the pixel grid (64-bit, row-major)."""

    geometry: Geometry
    values: np.ndarray

    def __post_init__(self):
        arr = _check_grid_values(self.geometry, self.values, "field")
        object.__setattr__(self, "values", _frozen_array(arr))

    @classmethod
    def zeros(cls, geometry):
        return cls(geometry, np.zeros(geometry.grid_shape))


@dataclass(frozen=True, eq=False)
class TensorField2D:
    """Symmetric 2D tensor field: xx, yy, xy scalar components, one geometry."""

    xx: ScalarField
    yy: ScalarField
    xy: ScalarField

    def __post_init__(self):
        if not (self.xx.geometry == self.yy.geometry == self.xy.geometry):
            raise GeometryError("tensor components must share one geometry")

    @property
    def geometry(self):
        return self.xx.geometry

    @classmethod
    def from_array(cls, geometry, stacked):
        """Build from a (3, rows, cols) array ordered xx, yy, xy."""
        stacked = np.asarray(stacked, dtype=np.float64)
        if stacked.shape != (3,) + geometry.grid_shape:
            raise GeometryError(
                f"expected shape {(3,) + geometry.grid_shape}, got {stacked.shape}"
            )
        return cls(
            ScalarField(geometry, stacked[0]),
            ScalarField(geometry, stacked[1]),
            ScalarField(geometry, stacked[2]),
        )

    @classmethod
    def zeros(cls, geometry):
        return cls.from_array(geometry, np.zeros((3,) + geometry.grid_shape))

    def as_array(self):
        """(3, rows, cols) copy ordered xx, yy, xy."""
        return np.stack([self.xx.values, self.yy.values, self.xy.values])

    @property
    def components(self):
        return {"xx": self.xx, "yy": self.yy, "xy": self.xy}


@dataclass(frozen=True, eq=False)
class ShapeMask:
    """Binary sample-support mask on the pixel grid."""

    geometry: Geometry
    values: np.ndarray

    def __post_init__(self):
        arr = _check_grid_values(self.geometry, self.values, "mask")
        if not np.all((arr == 0.0) | (arr == 1.0)):
            raise ValueError("mask values must be exactly 0 or 1")
        object.__setattr__(self, "values", _frozen_array(arr))

    @property
    def as_bool(self):
        return self.values != 0.0


@dataclass(frozen=True, eq=False)
class StrainSinogram:
    """Measured per-ray data: y = <strain> * L, path lengths L, validity mask.

    Measurements are stored already scaled by path length, so downstream
    consumers never divide by a vanishing L. A ray is valid iff its
    in-sample path exceeds L_MIN; y is forced to zero on invalid rays.
    """

    geometry: Geometry
    y: np.ndarray
    path_lengths: np.ndarray
    valid: np.ndarray = field(init=False)

    def __post_init__(self):
        shape = self.geometry.sinogram_shape
        y = np.asarray(self.y, dtype=np.float64)
        L = np.asarray(self.path_lengths, dtype=np.float64)
        if y.shape != shape or L.shape != shape:
            raise GeometryError(
                f"sinogram arrays must have shape {shape}, got {y.shape} and {L.shape}"
            )
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(L))):
            raise ValueError("sinogram contains non-finite values")
        if np.any(L < 0.0):
            raise ValueError("path lengths must be non-negative")
        valid = L > L_MIN
        y = np.where(valid, y, 0.0)
        object.__setattr__(self, "y", _frozen_array(y))
        object.__setattr__(self, "path_lengths", _frozen_array(L))
        object.__setattr__(self, "valid", _frozen_array(valid, dtype=bool))

    def mean_strain(self):
        """Per-ray average strain y/L; zero on invalid rays."""
        L = np.where(self.valid, self.path_lengths, 1.0)
        return np.where(self.valid, self.y / L, 0.0)


@dataclass(frozen=True, eq=False)
class VirtualSinogramTensor:
    """Per-component ray transforms (the unmeasured tensor sinograms)."""

    geometry: Geometry
    data: np.ndarray  # (3, num_views, num_detector_cols), ordered xx, yy, xy

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.shape != (3,) + self.geometry.sinogram_shape:
            raise GeometryError(
                f"expected shape {(3,) + self.geometry.sinogram_shape}, got {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("virtual sinogram contains non-finite values")
        object.__setattr__(self, "data", _frozen_array(arr))

    @property
    def xx(self):
        return self.data[0]

    @property
    def yy(self):
        return self.data[1]

    @property
    def xy(self):
        return self.data[2]

    @classmethod
    def zeros(cls, geometry):
        return cls(geometry, np.zeros((3,) + geometry.sinogram_shape))


# ---------------------------------------------------------------------------
# MFLD serialization
# ---------------------------------------------------------------------------

_KIND_SCALAR = "scalar"
_KIND_TENSOR = "tensor"
_KIND_SINOGRAM = "sinogram"


def _geometry_extra(geometry):
    return {
        "grid_rows": geometry.grid_rows,
        "grid_cols": geometry.grid_cols,
        "num_detector_cols": geometry.num_detector_cols,
        "angles": [float(a) for a in geometry.angles],
    }


def _geometry_from_extra(extra):
    try:
        return Geometry(
            int(extra["grid_rows"]),
            int(extra["grid_cols"]),
            np.asarray(extra["angles"], dtype=np.float64),
            int(extra["num_detector_cols"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MfldError(f"invalid geometry in header extra: {exc}") from exc


def _write_mfld(path, kind, rows, cols, planes, extra):
    header = {
        "magic": MFLD_MAGIC,
        "kind": kind,
        "rows": int(rows),
        "cols": int(cols),
        "components": len(planes),
        "extra": extra,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8"))
        fh.write(b"\n")
        for plane in planes:
            arr = np.ascontiguousarray(plane, dtype="<f8")
            if arr.shape != (rows, cols):
                raise MfldError(f"plane shape {arr.shape} does not match header"
                                f" ({rows}, {cols})")
            fh.write(arr.tobytes())


def write_field(field_obj, path):
    """Write a ScalarField, ShapeMask, TensorField2D, or StrainSinogram to `path`."""
    geom = field_obj.geometry
    extra = _geometry_extra(geom)
    if isinstance(field_obj, (ScalarField, ShapeMask)):
        _write_mfld(path, _KIND_SCALAR, geom.grid_rows, geom.grid_cols,
                    [field_obj.values], extra)
    elif isinstance(field_obj, TensorField2D):
        _write_mfld(path, _KIND_TENSOR, geom.grid_rows, geom.grid_cols,
                    [field_obj.xx.values, field_obj.yy.values, field_obj.xy.values],
                    extra)
    elif isinstance(field_obj, StrainSinogram):
        _write_mfld(path, _KIND_SINOGRAM, geom.num_views, geom.num_detector_cols,
                    [field_obj.y, field_obj.path_lengths,
                     field_obj.valid.astype(np.float64)], extra)
    else:
        raise MfldError(f"unsupported object type {type(field_obj).__name__}")


def _read_mfld(path):
    with open(path, "rb") as fh:
        header_line = fh.readline()
        payload = fh.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MfldError(f"corrupt MFLD header in {path}: {exc}") from exc
    if not isinstance(header, dict) or header.get("magic") != MFLD_MAGIC:
        raise MfldError(f"{path} is not an MFLD file")
    try:
        kind = header["kind"]
        rows = int(header["rows"])
        cols = int(header["cols"])
        components = int(header["components"])
        extra = header["extra"]
    except (KeyError, TypeError, ValueError) as exc:
        raise MfldError(f"incomplete MFLD header in {path}: {exc}") from exc
    expected = components * rows * cols * 8
    if len(payload) != expected:
        raise MfldError(
            f"{path}: payload holds {len(payload)} bytes, header implies {expected}"
        )
    planes = np.frombuffer(payload, dtype="<f8").reshape(components, rows, cols)
    if not np.all(np.isfinite(planes)):
        raise MfldError(f"{path}: payload contains non-finite values")
    return kind, planes, extra


def read_field(path):
    """Read an MFLD file, returning the matching container type.

    Scalar files whose values are all 0/1 still come back as ScalarField;
    use `read_mask` to reinterpret them as a ShapeMask.
    """
    kind, planes, extra = _read_mfld(path)
    geom = _geometry_from_extra(extra)
    if kind == _KIND_SCALAR:
        if planes.shape[0] != 1:
            raise MfldError(f"{path}: scalar file with {planes.shape[0]} components")
        return ScalarField(geom, planes[0])
    if kind == _KIND_TENSOR:
        if planes.shape[0] != 3:
            raise MfldError(f"{path}: tensor file with {planes.shape[0]} components")
        return TensorField2D.from_array(geom, planes)
    if kind == _KIND_SINOGRAM:
        if planes.shape[0] != 3:
            raise MfldError(f"{path}: sinogram file with {planes.shape[0]} components")
        sino = StrainSinogram(geom, planes[0], planes[1])
        if not np.array_equal(sino.valid, planes[2] != 0.0):
            raise MfldError(f"{path}: stored validity mask is inconsistent with L")
        return sino
    raise MfldError(f"{path}: unknown kind {kind!r}")


def read_mask(path):
    """Read a scalar MFLD file and validate it as a binary shape mask."""
    obj = read_field(path)
    if not isinstance(obj, ScalarField):
        raise MfldError(f"{path}: expected a scalar mask file, found {type(obj).__name__}")
    return ShapeMask(obj.geometry, obj.values)
