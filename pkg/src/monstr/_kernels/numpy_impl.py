"""Pure-numpy implementations of the hot kernels.

Used as the fallback backend when the compiled extension is unavailable
(or when MONSTR_PURE_PYTHON=1). Both backends expose the same functions
and must agree numerically; see tests/test_kernels.py and
benchmarks/bench_kernels.py.

Ray/pixel conventions: the grid spans [-cols/2, cols/2] x [-rows/2, rows/2]
in pixel units, pixel (r, c) covering [c - cols/2, c + 1 - cols/2) x
[r - rows/2, r + 1 - rows/2). Detector column d sits at signed offset
t = d - (num_det - 1)/2 from the rotation center, and the ray for view
angle theta passes through t * (-sin theta, cos theta) with direction
(cos theta, sin theta).
"""
from __future__ import annotations

import numpy as np

_DIR_EPS = 1e-12  # below this a direction component is treated as axis-parallel
_LEN_EPS = 1e-12  # drop degenerate (corner-grazing) segments


def siddon_entries(cos_t, sin_t, grid_rows, grid_cols, num_det):
    """Exact ray/pixel intersection lengths for all rays of all views.

    Returns (ray_index, pixel_index, length) arrays ordered by ray, and
    within each ray by position along the ray. Pixel index is row-major.
    """
    rows, cols = int(grid_rows), int(grid_cols)
    xmin, ymin = -cols / 2.0, -rows / 2.0
    t = np.arange(num_det, dtype=np.float64) - (num_det - 1) / 2.0
    planes_x = xmin + np.arange(cols + 1, dtype=np.float64)
    planes_y = ymin + np.arange(rows + 1, dtype=np.float64)

    all_rays = []
    all_pix = []
    all_len = []
    for view in range(len(cos_t)):
        dx, dy = float(cos_t[view]), float(sin_t[view])
        ox = -sin_t[view] * t
        oy = cos_t[view] * t

        if abs(dx) > _DIR_EPS:
            sx = (planes_x[None, :] - ox[:, None]) / dx
            sx_lo = np.minimum(sx[:, 0], sx[:, -1])
            sx_hi = np.maximum(sx[:, 0], sx[:, -1])
        else:
            inside = (ox >= xmin) & (ox <= -xmin)
            sx = np.full((num_det, cols + 1), np.inf)
            sx_lo = np.where(inside, -np.inf, np.inf)
            sx_hi = np.where(inside, np.inf, -np.inf)
        if abs(dy) > _DIR_EPS:
            sy = (planes_y[None, :] - oy[:, None]) / dy
            sy_lo = np.minimum(sy[:, 0], sy[:, -1])
            sy_hi = np.maximum(sy[:, 0], sy[:, -1])
        else:
            inside = (oy >= ymin) & (oy <= -ymin)
            sy = np.full((num_det, rows + 1), np.inf)
            sy_lo = np.where(inside, -np.inf, np.inf)
            sy_hi = np.where(inside, np.inf, -np.inf)

        s_in = np.maximum(sx_lo, sy_lo)
        s_out = np.minimum(sx_hi, sy_hi)
        hit = s_out - s_in > _LEN_EPS
        s_in = np.where(hit, s_in, 0.0)
        s_out = np.where(hit, s_out, 0.0)

        cands = np.concatenate([sx, sy], axis=1)
        cands = np.clip(cands, s_in[:, None], s_out[:, None])
        cands.sort(axis=1)

        seg = np.diff(cands, axis=1)
        mid = 0.5 * (cands[:, 1:] + cands[:, :-1])
        px = ox[:, None] + mid * dx
        py = oy[:, None] + mid * dy
        col = np.floor(px - xmin).astype(np.int64)
        row = np.floor(py - ymin).astype(np.int64)
        keep = (seg > _LEN_EPS) & (col >= 0) & (col < cols) & (row >= 0) & (row < rows)

        ray = view * num_det + np.arange(num_det, dtype=np.int64)[:, None]
        ray = np.broadcast_to(ray, keep.shape)
        all_rays.append(ray[keep])
        all_pix.append((row[keep] * cols + col[keep]))
        all_len.append(seg[keep])

    return (
        np.concatenate(all_rays),
        np.concatenate(all_pix),
        np.concatenate(all_len),
    )


# ---------------------------------------------------------------------------
# qGGMRF neighborhood kernels (p = 2 family)
#
# Pairwise potential, written to avoid the 0^negative singularity:
#   rho(d)  = d^2 / (2 sx^2 (1 + v)),          v = (|d| / (T sx))^(2-q)
#   psi(d)  = rho'(d) / (2 d)
#           = (1 / (2 sx^2 (1+v))) * (1 - (2-q)/2 * v / (1+v))
# psi is the symmetric-surrogate curvature; it is positive and
# non-increasing in |d| for q in (1, 2], which makes
#   Q(d; d0) = psi(d0) d^2 + const
# a majorizer of rho.
#
# The four pair directions cover the 8-neighborhood once per unordered
# pair: E = (0,+1), S = (+1,0), SE = (+1,+1), SW = (+1,-1).
# ---------------------------------------------------------------------------


def _pair_diffs(x):
    de = x[:, 1:] - x[:, :-1]
    ds = x[1:, :] - x[:-1, :]
    dse = x[1:, 1:] - x[:-1, :-1]
    dsw = x[1:, :-1] - x[:-1, 1:]
    return de, ds, dse, dsw


def _v_term(delta, sigma_x, q, T):
    return np.power(np.abs(delta) / (T * sigma_x), 2.0 - q)


def qggmrf_rho(delta, sigma_x, q, T):
    """Elementwise pair potential rho(delta)."""
    delta = np.asarray(delta, dtype=np.float64)
    v = _v_term(delta, sigma_x, q, T)
    return delta * delta / (2.0 * sigma_x * sigma_x * (1.0 + v))


def qggmrf_psi(delta, sigma_x, q, T):
    """Elementwise surrogate curvature psi(delta) = rho'(delta) / (2 delta)."""
    delta = np.asarray(delta, dtype=np.float64)
    v = _v_term(delta, sigma_x, q, T)
    one_v = 1.0 + v
    return (1.0 - 0.5 * (2.0 - q) * v / one_v) / (2.0 * sigma_x * sigma_x * one_v)


def qggmrf_potential(x, b_edge, b_diag, sigma_x, q, T):
    """Total prior energy: sum of rho over unordered 8-neighbor pairs."""
    de, ds, dse, dsw = _pair_diffs(x)
    total = b_edge * (np.sum(qggmrf_rho(de, sigma_x, q, T))
                      + np.sum(qggmrf_rho(ds, sigma_x, q, T)))
    total += b_diag * (np.sum(qggmrf_rho(dse, sigma_x, q, T))
                       + np.sum(qggmrf_rho(dsw, sigma_x, q, T)))
    return float(total)


def qggmrf_cell_weights(x, b_edge, b_diag, sigma_x, q, T):
    """Per-pair surrogate weights a = b * psi(delta) for the four directions."""
    de, ds, dse, dsw = _pair_diffs(x)
    return (
        b_edge * qggmrf_psi(de, sigma_x, q, T),
        b_edge * qggmrf_psi(ds, sigma_x, q, T),
        b_diag * qggmrf_psi(dse, sigma_x, q, T),
        b_diag * qggmrf_psi(dsw, sigma_x, q, T),
    )


def weighted_pair_lap(v, a_e, a_s, a_se, a_sw):
    """Gradient of sum_pairs a * (v_t - v_j)^2, i.e. 2x the weighted pair Laplacian."""
    out = np.zeros_like(v)
    d = 2.0 * a_e * (v[:, 1:] - v[:, :-1])
    out[:, 1:] += d
    out[:, :-1] -= d
    d = 2.0 * a_s * (v[1:, :] - v[:-1, :])
    out[1:, :] += d
    out[:-1, :] -= d
    d = 2.0 * a_se * (v[1:, 1:] - v[:-1, :-1])
    out[1:, 1:] += d
    out[:-1, :-1] -= d
    d = 2.0 * a_sw * (v[1:, :-1] - v[:-1, 1:])
    out[1:, :-1] += d
    out[:-1, 1:] -= d
    return out


def qggmrf_gradient(x, b_edge, b_diag, sigma_x, q, T):
    """Gradient of the prior energy (rho' = 2 delta psi applied pairwise)."""
    a = qggmrf_cell_weights(x, b_edge, b_diag, sigma_x, q, T)
    return weighted_pair_lap(x, *a)
