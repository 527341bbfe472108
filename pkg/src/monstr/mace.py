"""Outer consensus loop coordinating the four agents.

Each iteration executes, in order: detector data fit on Proj(sigma) - u,
tomographic reconstruction of p_tilde + u, the (optional) equilibrium
step, the support projection, and the dual update
u <- u + p_tilde - Proj(sigma). Disabling the equilibrium step gives the
baseline variant. All state starts at zero. Invalid rays carry u = 0
permanently and are excluded from the consensus residual.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from monstr.agents import (
    AgentParams,
    _apply_detector,
    _apply_equilibrium,
    _batched_cg,
    _recon_stack,
)
from monstr.core import (
    DivergenceError,
    GeometryError,
    ShapeMask,
    StrainSinogram,
    TensorField2D,
    VirtualSinogramTensor,
)
from monstr.elasticity import ElasticityModel, apply_matrix
from monstr.forward_model import compute_weights
from monstr.projector import Projector


@dataclass
class MaceState:
    """Final solver state plus the per-iteration convergence trace."""

    sigma: TensorField2D
    u: VirtualSinogramTensor
    iteration: int
    trace: list = field(default_factory=list)
    wall_seconds: list = field(default_factory=list)


def consensus_nrmse(p_tilde, proj_sigma, valid=None):
    """|| p_tilde - Proj(sigma) || / || p_tilde || over components and rays.

    Accepts VirtualSinogramTensor or raw (3, views, det) arrays; rays where
    `valid` is False are excluded. A zero denominator yields NaN (the
    undefined sentinel), never an exception.
    """
    a = p_tilde.data if isinstance(p_tilde, VirtualSinogramTensor) else np.asarray(p_tilde)
    b = (
        proj_sigma.data
        if isinstance(proj_sigma, VirtualSinogramTensor)
        else np.asarray(proj_sigma)
    )
    if a.shape != b.shape:
        raise GeometryError(f"shape mismatch: {a.shape} vs {b.shape}")
    if valid is not None:
        a = a[:, valid]
        b = b[:, valid]
    denom = float(np.sqrt(np.sum(a * a)))
    if denom == 0.0:
        return float("nan")
    return float(np.sqrt(np.sum((a - b) ** 2))) / denom


_SIGMA_X_INIT_CG_ITERS = 20


def resolve_sigma_x(sinogram, projector, weights, alpha_y, mask):
    """Prior scale from the data: 2x the std of a quick initial estimate.

    The estimate is a few conjugate-gradient iterations on the unregularized
    per-component least-squares problem, seeded from the detector agent
    applied to zeros. No filtered backprojection is involved, and the
    result is a deterministic function of the measurements.
    """
    valid = sinogram.valid
    p_init = _apply_detector(
        np.zeros((3,) + sinogram.geometry.sinogram_shape),
        sinogram.y, valid, weights.w_tilde, alpha_y,
    )
    vf = valid.astype(np.float64)

    def apply_op(v):
        return projector.backproject_stack(vf[None, :, :] * projector.project_stack(v))

    rhs = projector.backproject_stack(vf[None, :, :] * p_init)
    est = _batched_cg(
        apply_op, rhs, np.zeros_like(rhs), _SIGMA_X_INIT_CG_ITERS, 0.0
    )
    pooled = est[:, mask.as_bool]
    sigma_x = 2.0 * float(np.std(pooled))
    return max(sigma_x, 1e-12)


def run_monstr(
    sinogram: StrainSinogram,
    mask: ShapeMask,
    model: ElasticityModel,
    params: AgentParams,
    max_iters=50,
    enable_equilibrium=True,
    projector: Projector | None = None,
):
    """Run the consensus loop and return (strain TensorField2D, MaceState)."""
    params.validate()
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    geom = sinogram.geometry
    if not mask.geometry.grid_compatible(geom):
        raise GeometryError(
            f"mask grid {mask.geometry.grid_shape} does not match sinogram grid "
            f"{geom.grid_shape}"
        )
    if projector is None:
        projector = Projector(geom)
    elif projector.geometry != geom:
        raise GeometryError("projector geometry does not match sinogram")

    weights = compute_weights(geom.angles, model)
    sigma_x = params.qggmrf.sigma_x
    if isinstance(sigma_x, str):
        sigma_x = resolve_sigma_x(sinogram, projector, weights, params.alpha_y, mask)
    sigma_x = float(sigma_x)

    y = sinogram.y
    valid = sinogram.valid
    mask_values = mask.values
    sigma = np.zeros((3,) + geom.grid_shape)
    u = np.zeros((3,) + geom.sinogram_shape)
    trace = []
    wall = []

    for it in range(1, max_iters + 1):
        t0 = time.perf_counter()
        proj_sigma = projector.project_stack(sigma)
        p_tilde = _apply_detector(proj_sigma - u, y, valid, weights.w_tilde,
                                  params.alpha_y)
        sigma = _recon_stack(
            p_tilde + u, projector, valid, params.alpha_v, params.qggmrf,
            sigma_x, sigma, params.recon_inner_iters, params.recon_cg_iters,
            params.recon_cg_tol,
        )
        if enable_equilibrium:
            sigma = _apply_equilibrium(
                sigma, params.alpha_e, params.equil_sweeps, params.cg_tol,
                params.xy_solver,
            )
        sigma *= mask_values
        proj_new = projector.project_stack(sigma)
        u = u + p_tilde - proj_new
        u[:, ~valid] = 0.0
        if not (np.all(np.isfinite(sigma)) and np.all(np.isfinite(u))):
            raise DivergenceError(
                f"solver state became non-finite at iteration {it}", iteration=it
            )
        trace.append(consensus_nrmse(p_tilde, proj_new, valid))
        wall.append(time.perf_counter() - t0)

    sigma_field = TensorField2D.from_array(geom, sigma)
    strain = TensorField2D.from_array(geom, apply_matrix(model.stiffness_inv, sigma))
    state = MaceState(
        sigma=sigma_field,
        u=VirtualSinogramTensor(geom, u),
        iteration=max_iters,
        trace=trace,
        wall_seconds=wall,
    )
    return strain, state
