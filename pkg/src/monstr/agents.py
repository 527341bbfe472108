"""The four consensus agents operated by the outer reconstruction loop.

* detector agent: per-ray proximal data fit in the sinogram domain
  (closed form via a rank-one solve);
* reconstruction agent: per-component tomographic MAP estimate with a
  qGGMRF neighborhood prior (majorize-minimize with warm-started
  conjugate-gradient inner solves);
* equilibrium agent: proximal promotion of the stress-divergence-free
  constraint (block coordinate descent: tridiagonal row/column solves for
  the normal components, a transform-based or CG solve for the shear);
* support agent: zeroing outside the known sample mask.

All agents are deterministic functions of their inputs. Public functions
take the typed containers; the `_apply_*` array variants are the solver
hot path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.fft
import scipy.linalg

from monstr import _kernels
from monstr.core import (
    ConfigError,
    GeometryError,
    ShapeMask,
    StrainSinogram,
    TensorField2D,
    VirtualSinogramTensor,
)
from monstr.forward_model import RayWeights
from monstr.projector import Projector

# 8-neighborhood pair weights: 1 for edge-sharing, 1/sqrt(2) for diagonal
# neighbors, normalized so the eight directed weights sum to 1.
B_EDGE = 1.0 / (4.0 + 2.0 * math.sqrt(2.0))
B_DIAG = (1.0 / math.sqrt(2.0)) / (4.0 + 2.0 * math.sqrt(2.0))


@dataclass(frozen=True)
class QggmrfParams:
    """Edge-preserving neighborhood prior parameters (p = 2 family)."""

    q: float = 1.2
    p: float = 2.0
    T: float = 1.0
    sigma_x: float | str = "auto"
    neighbor_weights: str = "8-neighborhood"

    def validate(self):
        if not 1.0 < self.q <= 2.0:
            raise ConfigError(f"qggmrf.q must be in (1, 2], got {self.q}")
        if self.p != 2.0:
            raise ConfigError("qggmrf.p is fixed at 2")
        if self.T <= 0.0:
            raise ConfigError("qggmrf.T must be positive")
        if isinstance(self.sigma_x, str):
            if self.sigma_x != "auto":
                raise ConfigError('qggmrf.sigma_x must be positive or "auto"')
        elif not self.sigma_x > 0.0:
            raise ConfigError("qggmrf.sigma_x must be positive")
        if self.neighbor_weights != "8-neighborhood":
            raise ConfigError("only the 8-neighborhood prior is supported")


@dataclass(frozen=True)
class AgentParams:
    """Strengths and inner-solver budgets for all agents."""

    alpha_y: float = 1e-4       # detector data-fit strength
    alpha_v: float = 1e-4       # reconstruction noise std (sinogram units)
    alpha_e: float = 0.02       # equilibrium constraint strength
    qggmrf: QggmrfParams = field(default_factory=QggmrfParams)
    recon_inner_iters: int = 10
    recon_cg_iters: int = 12
    recon_cg_tol: float = 0.01
    equil_sweeps: int = 3
    cg_tol: float = 1e-10
    xy_solver: str = "dct"

    def validate(self):
        for name in ("alpha_y", "alpha_v", "alpha_e"):
            if not getattr(self, name) > 0.0:
                raise ConfigError(f"{name} must be positive")
        self.qggmrf.validate()
        if self.recon_inner_iters < 1:
            raise ConfigError("recon_inner_iters must be >= 1")
        if self.recon_cg_iters < 1:
            raise ConfigError("recon_cg_iters must be >= 1")
        if self.recon_cg_tol < 0.0:
            raise ConfigError("recon_cg_tol must be >= 0")
        if self.equil_sweeps < 1:
            raise ConfigError("equil_sweeps must be >= 1")
        if not self.cg_tol > 0.0:
            raise ConfigError("cg_tol must be positive")
        if self.xy_solver not in ("dct", "cg"):
            raise ConfigError(f'xy_solver must be "dct" or "cg", got {self.xy_solver}')
        return self

    def with_sigma_x(self, sigma_x):
        return replace(self, qggmrf=replace(self.qggmrf, sigma_x=float(sigma_x)))


# ---------------------------------------------------------------------------
# Detector agent
# ---------------------------------------------------------------------------


def _apply_detector(p0, y, valid, w_tilde, alpha_y):
    """Closed-form minimizer of (1/(2 a^2)) (y - wt.p)^2 + ||p - p0||^2 per ray.

    The normal equations (I + wt wt^T / (2 a^2)) p = p0 + wt y / (2 a^2)
    are rank-one; Sherman-Morrison gives
        p = p0 + wt (y - wt.p0) / (2 a^2 + ||wt||^2).
    Invalid rays pass through unchanged.
    """
    wt = np.ascontiguousarray(w_tilde.T)[:, :, None]          # (3, views, 1)
    resid = y - np.sum(wt * p0, axis=0)                       # (views, det)
    denom = 2.0 * alpha_y * alpha_y + np.sum(w_tilde * w_tilde, axis=1)[:, None]
    coef = np.where(valid, resid / denom, 0.0)
    return p0 + wt * coef[None, :, :]


def detector_agent(
    p_tilde_0: VirtualSinogramTensor,
    sinogram: StrainSinogram,
    weights: RayWeights,
    alpha_y,
) -> VirtualSinogramTensor:
    """Pull each valid ray's virtual-sinogram triple toward the measurement."""
    if alpha_y <= 0.0:
        raise ConfigError("alpha_y must be positive")
    if p_tilde_0.geometry != sinogram.geometry:
        raise GeometryError("virtual sinogram geometry does not match measurements")
    out = _apply_detector(
        p_tilde_0.data, sinogram.y, sinogram.valid, weights.w_tilde, float(alpha_y)
    )
    return VirtualSinogramTensor(p_tilde_0.geometry, out)


# ---------------------------------------------------------------------------
# Reconstruction agent
# ---------------------------------------------------------------------------


def _batched_cg(apply_op, rhs, x0, max_iters, rel_tol):
    """Conjugate gradient on k independent SPD systems in lockstep.

    Per-column step scalars keep the component solves mathematically
    independent; iteration stops when every column's residual is below
    rel_tol * ||rhs|| (or on the iteration budget).
    """
    x = x0.copy()
    r = rhs - apply_op(x)
    p = r.copy()
    rs = np.sum(r * r, axis=(1, 2))
    thresh = (rel_tol * rel_tol) * np.sum(rhs * rhs, axis=(1, 2))
    tiny = np.finfo(np.float64).tiny
    for _ in range(max_iters):
        if np.all(rs <= thresh):
            break
        ap = apply_op(p)
        pap = np.sum(p * ap, axis=(1, 2))
        alpha = np.where(pap > tiny, rs / np.where(pap > tiny, pap, 1.0), 0.0)
        x += alpha[:, None, None] * p
        r -= alpha[:, None, None] * ap
        rs_new = np.sum(r * r, axis=(1, 2))
        beta = np.where(rs > tiny, rs_new / np.where(rs > tiny, rs, 1.0), 0.0)
        p = r + beta[:, None, None] * p
        rs = rs_new
    return x


def _recon_stack(p_stack, projector, valid, alpha_v, qp, sigma_x, warm,
                 inner_iters, cg_iters, cg_tol):
    """Majorize-minimize MAP solve for a stack of components."""
    w = valid.astype(np.float64)
    inv_av2 = 1.0 / (alpha_v * alpha_v)
    rhs = inv_av2 * projector.backproject_stack(w[None, :, :] * p_stack)
    x = warm.copy()
    k = x.shape[0]
    for _ in range(inner_iters):
        cell_w = [
            _kernels.qggmrf_cell_weights(x[i], B_EDGE, B_DIAG, sigma_x, qp.q, qp.T)
            for i in range(k)
        ]

        def apply_op(v):
            proj = projector.project_stack(v)
            out = inv_av2 * projector.backproject_stack(w[None, :, :] * proj)
            for i in range(k):
                out[i] += _kernels.weighted_pair_lap(v[i], *cell_w[i])
            return out

        x = _batched_cg(apply_op, rhs, x, cg_iters, cg_tol)
    return x


def reconstruction_agent(
    p_tilde: VirtualSinogramTensor,
    projector: Projector,
    params: AgentParams,
    valid=None,
    warm_start: TensorField2D | None = None,
) -> TensorField2D:
    """MAP tomographic reconstruction of each tensor component independently.

    Minimizes (1/(2 alpha_v^2)) ||p_k - A sigma_k||^2 + g(sigma_k) per
    component, with invalid rays excluded from the data term when a
    validity mask is given. The solve runs a fixed budget of
    majorize-minimize steps, warm-started from `warm_start`.
    """
    params.validate()
    sigma_x = params.qggmrf.sigma_x
    if isinstance(sigma_x, str):
        raise ConfigError(
            "qggmrf.sigma_x is 'auto'; resolve it to a number before calling "
            "the reconstruction agent"
        )
    geom = projector.geometry
    if p_tilde.geometry != geom:
        raise GeometryError("virtual sinogram geometry does not match projector")
    if valid is None:
        valid = np.ones(geom.sinogram_shape, dtype=bool)
    warm = (
        warm_start.as_array()
        if warm_start is not None
        else np.zeros((3,) + geom.grid_shape)
    )
    out = _recon_stack(
        p_tilde.data, projector, valid, float(params.alpha_v), params.qggmrf,
        float(sigma_x), warm, params.recon_inner_iters, params.recon_cg_iters,
        params.recon_cg_tol,
    )
    return TensorField2D.from_array(geom, out)


def recon_objective(x, p_k, projector, valid, alpha_v, qp, sigma_x):
    """Data-fit plus prior energy for one component (test/diagnostic hook)."""
    resid = (projector.project(x) - p_k) * valid
    data = 0.5 / (alpha_v * alpha_v) * float(np.sum(resid * resid))
    prior = _kernels.qggmrf_potential(x, B_EDGE, B_DIAG, sigma_x, qp.q, qp.T)
    return data + prior


# ---------------------------------------------------------------------------
# Equilibrium agent
# ---------------------------------------------------------------------------
#
# Forward differences with spacing 1 and zero-padded final row/column:
# (Dx f)[r, c] = f[r, c+1] - f[r, c] for c < cols-1, else 0. Dx^T Dx is
# then per-row tridiagonal (1, 2, ..., 2, 1 diagonal), so the xx and yy
# blocks reduce to banded solves; the shear block couples both axes and is
# solved either by a DCT-II diagonalization (exact for this stencil) or by
# conjugate gradient.


def forward_diff_x(f):
    out = np.zeros_like(f)
    out[:, :-1] = f[:, 1:] - f[:, :-1]
    return out


def forward_diff_y(f):
    out = np.zeros_like(f)
    out[:-1, :] = f[1:, :] - f[:-1, :]
    return out


def forward_diff_x_adjoint(g):
    out = np.zeros_like(g)
    out[:, 1:] += g[:, :-1]
    out[:, :-1] -= g[:, :-1]
    return out


def forward_diff_y_adjoint(g):
    out = np.zeros_like(g)
    out[1:, :] += g[:-1, :]
    out[:-1, :] -= g[:-1, :]
    return out


def equilibrium_residuals(stack):
    """The two divergence residual fields of the stress tensor stack."""
    r1 = forward_diff_x(stack[0]) + forward_diff_y(stack[2])
    r2 = forward_diff_y(stack[1]) + forward_diff_x(stack[2])
    return r1, r2


def divergence_norm(stack):
    """||D(sigma)||_2 over both residual fields."""
    r1, r2 = equilibrium_residuals(stack)
    return math.sqrt(float(np.sum(r1 * r1) + np.sum(r2 * r2)))


def equilibrium_objective(stack, stack0, alpha_e):
    c = 1.0 / (2.0 * alpha_e * alpha_e)
    r1, r2 = equilibrium_residuals(stack)
    dist = stack - stack0
    return c * float(np.sum(r1 * r1) + np.sum(r2 * r2)) + float(np.sum(dist * dist))


def equilibrium_block_gradients(stack, stack0, alpha_e):
    """Objective gradient split by component block (xx, yy, xy)."""
    c = 1.0 / (2.0 * alpha_e * alpha_e)
    r1, r2 = equilibrium_residuals(stack)
    gxx = 2.0 * c * forward_diff_x_adjoint(r1) + 2.0 * (stack[0] - stack0[0])
    gyy = 2.0 * c * forward_diff_y_adjoint(r2) + 2.0 * (stack[1] - stack0[1])
    gxy = (
        2.0 * c * (forward_diff_y_adjoint(r1) + forward_diff_x_adjoint(r2))
        + 2.0 * (stack[2] - stack0[2])
    )
    return gxx, gyy, gxy


def _tridiag_ab(n, c):
    """Banded form of I + c * Dx^T Dx for scipy.linalg.solve_banded."""
    diag = np.full(n, 1.0 + 2.0 * c)
    if n >= 1:
        diag[0] = 1.0 + c
        diag[-1] = 1.0 + c
    if n == 1:
        diag[0] = 1.0
    ab = np.zeros((3, n))
    ab[0, 1:] = -c
    ab[1, :] = diag
    ab[2, :-1] = -c
    return ab


def _neumann_eigenvalues(n):
    k = np.arange(n, dtype=np.float64)
    return 2.0 - 2.0 * np.cos(np.pi * k / n)


def _solve_xy_dct(rhs, c):
    rows, cols = rhs.shape
    lam_r = _neumann_eigenvalues(rows)
    lam_c = _neumann_eigenvalues(cols)
    denom = 1.0 + c * (lam_r[:, None] + lam_c[None, :])
    spec = scipy.fft.dctn(rhs, type=2, norm="ortho")
    return scipy.fft.idctn(spec / denom, type=2, norm="ortho")


def _solve_xy_cg(rhs, c, tol, x0):
    def apply_op(v):
        return (
            v
            + c * forward_diff_y_adjoint(forward_diff_y(v))
            + c * forward_diff_x_adjoint(forward_diff_x(v))
        )

    x = x0.copy()
    r = rhs - apply_op(x)
    p = r.copy()
    rs = float(np.sum(r * r))
    thresh = tol * tol * float(np.sum(rhs * rhs))
    max_iters = 20 * max(rhs.shape) + 50
    for _ in range(max_iters):
        if rs <= thresh:
            break
        ap = apply_op(p)
        pap = float(np.sum(p * ap))
        if pap <= 0.0:
            break
        alpha = rs / pap
        x += alpha * p
        r -= alpha * ap
        rs_new = float(np.sum(r * r))
        p = r + (rs_new / rs) * p
        rs = rs_new
    return x


def _apply_equilibrium(stack0, alpha_e, sweeps, cg_tol, xy_solver):
    c = 1.0 / (2.0 * alpha_e * alpha_e)
    rows, cols = stack0.shape[1:]
    ab_cols = _tridiag_ab(cols, c)
    ab_rows = _tridiag_ab(rows, c)
    x = stack0.copy()
    for _ in range(sweeps):
        rhs = stack0[0] - c * forward_diff_x_adjoint(forward_diff_y(x[2]))
        x[0] = scipy.linalg.solve_banded((1, 1), ab_cols, rhs.T).T
        rhs = stack0[1] - c * forward_diff_y_adjoint(forward_diff_x(x[2]))
        x[1] = scipy.linalg.solve_banded((1, 1), ab_rows, rhs)
        rhs = stack0[2] - c * (
            forward_diff_y_adjoint(forward_diff_x(x[0]))
            + forward_diff_x_adjoint(forward_diff_y(x[1]))
        )
        if xy_solver == "dct":
            x[2] = _solve_xy_dct(rhs, c)
        else:
            x[2] = _solve_xy_cg(rhs, c, cg_tol, x[2])
    return x


def equilibrium_agent(
    sigma0: TensorField2D, alpha_e, sweeps=3, cg_tol=1e-10, xy_solver="dct"
) -> TensorField2D:
    """Proximal step toward a divergence-free stress tensor.

    Block coordinate descent from sigma0, so the returned tensor never has
    a larger divergence norm than the input.
    """
    if alpha_e <= 0.0:
        raise ConfigError("alpha_e must be positive")
    if xy_solver not in ("dct", "cg"):
        raise ConfigError(f'xy_solver must be "dct" or "cg", got {xy_solver}')
    out = _apply_equilibrium(
        sigma0.as_array(), float(alpha_e), int(sweeps), float(cg_tol), xy_solver
    )
    return TensorField2D.from_array(sigma0.geometry, out)


# ---------------------------------------------------------------------------
# Support agent
# ---------------------------------------------------------------------------


def support_agent(sigma0: TensorField2D, mask: ShapeMask) -> TensorField2D:
    """Zero the stress tensor outside the known sample support."""
    if not sigma0.geometry.grid_compatible(mask.geometry):
        raise GeometryError(
            f"mask grid {mask.geometry.grid_shape} does not match stress tensor "
            f"grid {sigma0.geometry.grid_shape}"
        )
    return TensorField2D.from_array(sigma0.geometry, sigma0.as_array() * mask.values)
