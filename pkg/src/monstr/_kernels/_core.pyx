# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of numpy_impl: Siddon system assembly and qGGMRF kernels.

Implements the same formulas in the same evaluation order as the numpy
fallback so the two backends agree numerically (bit-for-bit for the ray
tracer; to rounding of libm pow for the prior kernels).
"""
import numpy as np

from libc.math cimport INFINITY, fabs, floor, pow
from libc.stdlib cimport free, malloc

cdef double DIR_EPS = 1e-12
cdef double LEN_EPS = 1e-12


cdef void _insertion_sort(double* a, Py_ssize_t n) nogil:
    cdef Py_ssize_t i, j
    cdef double key
    for i in range(1, n):
        key = a[i]
        j = i - 1
        while j >= 0 and a[j] > key:
            a[j + 1] = a[j]
            j -= 1
        a[j + 1] = key


def siddon_entries(cos_t, sin_t, grid_rows, grid_cols, num_det):
    """Exact ray/pixel intersection lengths; see numpy_impl.siddon_entries."""
    cdef double[::1] cview = np.ascontiguousarray(cos_t, dtype=np.float64)
    cdef double[::1] sview = np.ascontiguousarray(sin_t, dtype=np.float64)
    cdef Py_ssize_t rows = grid_rows, cols = grid_cols, ndet = num_det
    cdef Py_ssize_t nviews = cview.shape[0]
    cdef double xmin = -cols / 2.0, ymin = -rows / 2.0
    cdef Py_ssize_t ncand = (cols + 1) + (rows + 1)
    cdef Py_ssize_t max_entries = nviews * ndet * (ncand - 1)

    ray_out = np.empty(max_entries, dtype=np.int64)
    pix_out = np.empty(max_entries, dtype=np.int64)
    len_out = np.empty(max_entries, dtype=np.float64)
    cdef long long[::1] ray_v = ray_out
    cdef long long[::1] pix_v = pix_out
    cdef double[::1] len_v = len_out

    cdef double* cand = <double*> malloc(ncand * sizeof(double))
    if cand == NULL:
        raise MemoryError()

    cdef Py_ssize_t view, d, k, n_out = 0
    cdef double dx, dy, ox, oy, t
    cdef double sx_lo, sx_hi, sy_lo, sy_hi, s_in, s_out, s0, s1
    cdef double seg, mid, px, py
    cdef Py_ssize_t col, row
    cdef bint inside

    try:
        for view in range(nviews):
            dx = cview[view]
            dy = sview[view]
            for d in range(ndet):
                t = d - (ndet - 1) / 2.0
                ox = -sview[view] * t
                oy = cview[view] * t

                if fabs(dx) > DIR_EPS:
                    s0 = (xmin - ox) / dx
                    s1 = (xmin + cols - ox) / dx
                    sx_lo = s0 if s0 < s1 else s1
                    sx_hi = s1 if s0 < s1 else s0
                else:
                    inside = (ox >= xmin) and (ox <= -xmin)
                    sx_lo = -INFINITY if inside else INFINITY
                    sx_hi = INFINITY if inside else -INFINITY
                if fabs(dy) > DIR_EPS:
                    s0 = (ymin - oy) / dy
                    s1 = (ymin + rows - oy) / dy
                    sy_lo = s0 if s0 < s1 else s1
                    sy_hi = s1 if s0 < s1 else s0
                else:
                    inside = (oy >= ymin) and (oy <= -ymin)
                    sy_lo = -INFINITY if inside else INFINITY
                    sy_hi = INFINITY if inside else -INFINITY

                s_in = sx_lo if sx_lo > sy_lo else sy_lo
                s_out = sx_hi if sx_hi < sy_hi else sy_hi
                if not (s_out - s_in > LEN_EPS):
                    continue

                if fabs(dx) > DIR_EPS:
                    for k in range(cols + 1):
                        cand[k] = (xmin + k - ox) / dx
                else:
                    for k in range(cols + 1):
                        cand[k] = INFINITY
                if fabs(dy) > DIR_EPS:
                    for k in range(rows + 1):
                        cand[cols + 1 + k] = (ymin + k - oy) / dy
                else:
                    for k in range(rows + 1):
                        cand[cols + 1 + k] = INFINITY

                for k in range(ncand):
                    if cand[k] < s_in:
                        cand[k] = s_in
                    elif cand[k] > s_out:
                        cand[k] = s_out
                _insertion_sort(cand, ncand)

                for k in range(ncand - 1):
                    seg = cand[k + 1] - cand[k]
                    if not (seg > LEN_EPS):
                        continue
                    mid = 0.5 * (cand[k + 1] + cand[k])
                    px = ox + mid * dx
                    py = oy + mid * dy
                    col = <Py_ssize_t> floor(px - xmin)
                    row = <Py_ssize_t> floor(py - ymin)
                    if col < 0 or col >= cols or row < 0 or row >= rows:
                        continue
                    ray_v[n_out] = view * ndet + d
                    pix_v[n_out] = row * cols + col
                    len_v[n_out] = seg
                    n_out += 1
    finally:
        free(cand)

    return ray_out[:n_out].copy(), pix_out[:n_out].copy(), len_out[:n_out].copy()


cdef inline double _rho(double delta, double sigma_x, double q, double T) nogil:
    cdef double v = pow(fabs(delta) / (T * sigma_x), 2.0 - q)
    return delta * delta / (2.0 * sigma_x * sigma_x * (1.0 + v))


cdef inline double _psi(double delta, double sigma_x, double q, double T) nogil:
    cdef double v = pow(fabs(delta) / (T * sigma_x), 2.0 - q)
    cdef double one_v = 1.0 + v
    return (1.0 - 0.5 * (2.0 - q) * v / one_v) / (2.0 * sigma_x * sigma_x * one_v)


def qggmrf_rho(delta, sigma_x, q, T):
    """Elementwise pair potential rho(delta)."""
    arr = np.ascontiguousarray(delta, dtype=np.float64)
    out = np.empty_like(arr)
    cdef double[::1] src = arr.ravel()
    cdef double[::1] dst = out.ravel()
    cdef double sx = sigma_x, qq = q, tt = T
    cdef Py_ssize_t i
    for i in range(src.shape[0]):
        dst[i] = _rho(src[i], sx, qq, tt)
    return out


def qggmrf_psi(delta, sigma_x, q, T):
    """Elementwise surrogate curvature psi(delta)."""
    arr = np.ascontiguousarray(delta, dtype=np.float64)
    out = np.empty_like(arr)
    cdef double[::1] src = arr.ravel()
    cdef double[::1] dst = out.ravel()
    cdef double sx = sigma_x, qq = q, tt = T
    cdef Py_ssize_t i
    for i in range(src.shape[0]):
        dst[i] = _psi(src[i], sx, qq, tt)
    return out


def qggmrf_potential(x, b_edge, b_diag, sigma_x, q, T):
    """Total prior energy over unordered 8-neighbor pairs."""
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t rows = xv.shape[0], cols = xv.shape[1]
    cdef double be = b_edge, bd = b_diag, sx = sigma_x, qq = q, tt = T
    cdef double total_e = 0.0, total_s = 0.0, total_se = 0.0, total_sw = 0.0
    cdef Py_ssize_t r, c
    for r in range(rows):
        for c in range(cols - 1):
            total_e += _rho(xv[r, c + 1] - xv[r, c], sx, qq, tt)
    for r in range(rows - 1):
        for c in range(cols):
            total_s += _rho(xv[r + 1, c] - xv[r, c], sx, qq, tt)
    for r in range(rows - 1):
        for c in range(cols - 1):
            total_se += _rho(xv[r + 1, c + 1] - xv[r, c], sx, qq, tt)
    for r in range(rows - 1):
        for c in range(1, cols):
            total_sw += _rho(xv[r + 1, c - 1] - xv[r, c], sx, qq, tt)
    return float(be * (total_e + total_s) + bd * (total_se + total_sw))


def qggmrf_cell_weights(x, b_edge, b_diag, sigma_x, q, T):
    """Per-pair surrogate weights a = b * psi(delta), four direction arrays."""
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t rows = xv.shape[0], cols = xv.shape[1]
    cdef double be = b_edge, bd = b_diag, sx = sigma_x, qq = q, tt = T

    a_e = np.empty((rows, cols - 1))
    a_s = np.empty((rows - 1, cols))
    a_se = np.empty((rows - 1, cols - 1))
    a_sw = np.empty((rows - 1, cols - 1))
    cdef double[:, ::1] ev = a_e, sv = a_s, sev = a_se, swv = a_sw
    cdef Py_ssize_t r, c
    for r in range(rows):
        for c in range(cols - 1):
            ev[r, c] = be * _psi(xv[r, c + 1] - xv[r, c], sx, qq, tt)
    for r in range(rows - 1):
        for c in range(cols):
            sv[r, c] = be * _psi(xv[r + 1, c] - xv[r, c], sx, qq, tt)
    for r in range(rows - 1):
        for c in range(cols - 1):
            sev[r, c] = bd * _psi(xv[r + 1, c + 1] - xv[r, c], sx, qq, tt)
            swv[r, c] = bd * _psi(xv[r + 1, c] - xv[r, c + 1], sx, qq, tt)
    return a_e, a_s, a_se, a_sw


def weighted_pair_lap(v, a_e, a_s, a_se, a_sw):
    """Gradient of sum_pairs a * (v_t - v_j)^2 (2x weighted pair Laplacian)."""
    cdef double[:, ::1] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef double[:, ::1] ev = np.ascontiguousarray(a_e, dtype=np.float64)
    cdef double[:, ::1] sv = np.ascontiguousarray(a_s, dtype=np.float64)
    cdef double[:, ::1] sev = np.ascontiguousarray(a_se, dtype=np.float64)
    cdef double[:, ::1] swv = np.ascontiguousarray(a_sw, dtype=np.float64)
    cdef Py_ssize_t rows = vv.shape[0], cols = vv.shape[1]
    out = np.zeros((rows, cols))
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t r, c
    cdef double d
    for r in range(rows):
        for c in range(cols - 1):
            d = 2.0 * ev[r, c] * (vv[r, c + 1] - vv[r, c])
            ov[r, c + 1] += d
            ov[r, c] -= d
    for r in range(rows - 1):
        for c in range(cols):
            d = 2.0 * sv[r, c] * (vv[r + 1, c] - vv[r, c])
            ov[r + 1, c] += d
            ov[r, c] -= d
    for r in range(rows - 1):
        for c in range(cols - 1):
            d = 2.0 * sev[r, c] * (vv[r + 1, c + 1] - vv[r, c])
            ov[r + 1, c + 1] += d
            ov[r, c] -= d
    for r in range(rows - 1):
        for c in range(cols - 1):
            d = 2.0 * swv[r, c] * (vv[r + 1, c] - vv[r, c + 1])
            ov[r + 1, c] += d
            ov[r, c + 1] -= d
    return out


def qggmrf_gradient(x, b_edge, b_diag, sigma_x, q, T):
    """Gradient of the prior energy."""
    a_e, a_s, a_se, a_sw = qggmrf_cell_weights(x, b_edge, b_diag, sigma_x, q, T)
    return weighted_pair_lap(x, a_e, a_s, a_se, a_sw)
