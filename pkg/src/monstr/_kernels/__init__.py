"""Kernel backend selection.

The compiled extension (`monstr._kernels._core`, built from _core.pyx) is
preferred when importable; otherwise the pure-numpy fallback is used.
Set MONSTR_PURE_PYTHON=1 to force the fallback. `BACKEND` names the
active implementation and is recorded in run manifests.
"""
import os

from monstr._kernels import numpy_impl

if os.environ.get("MONSTR_PURE_PYTHON", "0") == "1":
    _impl = numpy_impl
    BACKEND = "numpy"
else:
    try:
        from monstr._kernels import _core as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        _impl = numpy_impl
        BACKEND = "numpy"

siddon_entries = _impl.siddon_entries
qggmrf_rho = _impl.qggmrf_rho
qggmrf_psi = _impl.qggmrf_psi
qggmrf_potential = _impl.qggmrf_potential
qggmrf_cell_weights = _impl.qggmrf_cell_weights
qggmrf_gradient = _impl.qggmrf_gradient
weighted_pair_lap = _impl.weighted_pair_lap
