# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Gibbs hot kernels. Same signatures and semantics as ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, exp, lgamma, fabs, sqrt, INFINITY

from .errors import NumericalError

cnp.import_array()

cdef double LOG_2PI = 1.8378770664093453
cdef double JITTER_START = 1e-10
cdef double JITTER_MAX = 1e-6


cdef int _chol_inplace(double[:, ::1] a, Py_ssize_t k) noexcept nogil:
    """Lower Cholesky of the leading k x k block, in place. Returns 0 on success."""
    cdef Py_ssize_t i, j, m
    cdef double s
    for j in range(k):
        s = a[j, j]
        for m in range(j):
            s -= a[j, m] * a[j, m]
        if not s > 0.0:
            return 1
        s = sqrt(s)
        a[j, j] = s
        for i in range(j + 1, k):
            for m in range(j):
                a[i, j] -= a[i, m] * a[j, m]
            a[i, j] /= s
    return 0


cdef int _chol_jitter(double[:, ::1] a, double[:, ::1] work, Py_ssize_t k) noexcept nogil:
    """Cholesky of ``a`` into ``work`` with escalating diagonal jitter; ``a`` is untouched."""
    cdef Py_ssize_t i, j
    cdef double scale = 0.0, jitter
    for i in range(k):
        for j in range(i + 1):
            work[i, j] = a[i, j]
    if _chol_inplace(work, k) == 0:
        return 0
    for i in range(k):
        if fabs(a[i, i]) > scale:
            scale = fabs(a[i, i])
    if scale == 0.0:
        scale = 1.0
    jitter = JITTER_START
    while jitter <= JITTER_MAX * (1 + 1e-9):
        for i in range(k):
            for j in range(i + 1):
                work[i, j] = a[i, j]
            work[i, i] += jitter * scale
        if _chol_inplace(work, k) == 0:
            return 0
        jitter *= 10.0
    return 1


cdef void _precision_draw(double[:, ::1] L, const double* rhs, const double* noise, double* tmp,
                          double* out, Py_ssize_t k) noexcept nogil:
    """out = L^{-T} (L^{-1} rhs + noise)."""
    cdef Py_ssize_t i, m
    cdef double s
    for i in range(k):
        s = rhs[i]
        for m in range(i):
            s -= L[i, m] * tmp[m]
        tmp[i] = s / L[i, i]
    for i in range(k - 1, -1, -1):
        s = tmp[i] + noise[i]
        for m in range(i + 1, k):
            s -= L[m, i] * out[m]
        out[i] = s / L[i, i]


def sample_loadings(const double[:, ::1] y, const double[:, ::1] eta,
                    const double[::1] sigma2, const double[:, ::1] prior_var,
                    const double[:, ::1] noise):
    cdef Py_ssize_t n = y.shape[0], p = y.shape[1], H = eta.shape[1]
    cdef Py_ssize_t i, j, h, g
    cdef double inv_s, s
    gram_arr = np.zeros((H, H))
    cdef double[:, ::1] gram = gram_arr
    ety_arr = np.zeros((p, H))
    cdef double[:, ::1] ety = ety_arr
    prec_arr = np.empty((H, H))
    cdef double[:, ::1] prec = prec_arr
    work_arr = np.empty((H, H))
    cdef double[:, ::1] work = work_arr
    rhs_arr = np.empty(H)
    cdef double[::1] rhs = rhs_arr
    tmp_arr = np.empty(H)
    cdef double[::1] tmp = tmp_arr
    out_arr = np.empty((p, H))
    cdef double[:, ::1] out = out_arr
    cdef int failed = 0

    with nogil:
        for i in range(n):
            for h in range(H):
                for g in range(h + 1):
                    gram[h, g] += eta[i, h] * eta[i, g]
            for j in range(p):
                for h in range(H):
                    ety[j, h] += eta[i, h] * y[i, j]
        for j in range(p):
            inv_s = 1.0 / sigma2[j]
            for h in range(H):
                for g in range(h + 1):
                    prec[h, g] = gram[h, g] * inv_s
                prec[h, h] += 1.0 / prior_var[j, h]
                rhs[h] = ety[j, h] * inv_s
            if _chol_jitter(prec, work, H) != 0:
                failed = 1
                break
            _precision_draw(work, &rhs[0], &noise[j, 0], &tmp[0], &out[j, 0], H)
    if failed:
        raise NumericalError("loadings precision is not positive definite after jitter")
    return out_arr


def sample_factors(const double[:, ::1] y, const double[:, ::1] lam,
                   const double[::1] sigma2, const double[:, ::1] noise):
    cdef Py_ssize_t n = y.shape[0], p = y.shape[1], H = lam.shape[1]
    cdef Py_ssize_t i, j, h, g
    cdef double s
    scaled_arr = np.empty((p, H))
    cdef double[:, ::1] scaled = scaled_arr
    prec_arr = np.zeros((H, H))
    cdef double[:, ::1] prec = prec_arr
    work_arr = np.empty((H, H))
    cdef double[:, ::1] work = work_arr
    rhs_arr = np.empty(H)
    cdef double[::1] rhs = rhs_arr
    tmp_arr = np.empty(H)
    cdef double[::1] tmp = tmp_arr
    out_arr = np.empty((n, H))
    cdef double[:, ::1] out = out_arr
    cdef int failed = 0

    with nogil:
        for j in range(p):
            for h in range(H):
                scaled[j, h] = lam[j, h] / sigma2[j]
        for j in range(p):
            for h in range(H):
                for g in range(h + 1):
                    prec[h, g] += lam[j, h] * scaled[j, g]
        for h in range(H):
            prec[h, h] += 1.0
        failed = _chol_jitter(prec, work, H)
        if not failed:
            for i in range(n):
                for h in range(H):
                    s = 0.0
                    for j in range(p):
                        s += y[i, j] * scaled[j, h]
                    rhs[h] = s
                _precision_draw(work, &rhs[0], &noise[i, 0], &tmp[0], &out[i, 0], H)
    if failed:
        raise NumericalError("factor precision is not positive definite after jitter")
    return out_arr


def column_log_densities(const double[:, ::1] lam, double theta_inf, double a_theta,
                         double b_theta):
    cdef Py_ssize_t p = lam.shape[0], H = lam.shape[1], j, h
    cdef double half_p = 0.5 * p, sq
    cdef double c_spike = -half_p * (LOG_2PI + log(theta_inf))
    cdef double c_slab = (-half_p * LOG_2PI + a_theta * log(b_theta)
                          + lgamma(a_theta + half_p) - lgamma(a_theta))
    spike_arr = np.empty(H)
    slab_arr = np.empty(H)
    cdef double[::1] spike = spike_arr, slab = slab_arr
    with nogil:
        for h in range(H):
            sq = 0.0
            for j in range(p):
                sq += lam[j, h] * lam[j, h]
            spike[h] = c_spike - 0.5 * sq / theta_inf
            slab[h] = c_slab - (a_theta + half_p) * log(b_theta + 0.5 * sq)
    return spike_arr, slab_arr


def sample_indicators(const double[:, ::1] lam, const double[::1] log_omega,
                      double theta_inf, double a_theta, double b_theta,
                      const double[::1] uniforms):
    cdef Py_ssize_t H = lam.shape[1], h, l
    spike_arr, slab_arr = column_log_densities(lam, theta_inf, a_theta, b_theta)
    cdef double[::1] spike = spike_arr, slab = slab_arr
    cdef double top, val, total, target
    cum_arr = np.empty(H)
    cdef double[::1] cum = cum_arr
    z_arr = np.empty(H, dtype=np.int64)
    cdef cnp.int64_t[::1] z = z_arr
    with nogil:
        for h in range(H):
            top = -INFINITY
            for l in range(H):
                val = log_omega[l] + (spike[h] if l <= h else slab[h])
                cum[l] = val
                if val > top:
                    top = val
            total = 0.0
            for l in range(H):
                total += exp(cum[l] - top)
                cum[l] = total
            target = uniforms[h] * total
            l = 0
            while l < H - 1 and cum[l] <= target:
                l += 1
            z[h] = l + 1
    return z_arr


def residual_ss(const double[:, ::1] y, const double[:, ::1] eta, const double[:, ::1] lam):
    cdef Py_ssize_t n = y.shape[0], p = y.shape[1], H = eta.shape[1], i, j, h
    cdef double r
    out_arr = np.zeros(p)
    cdef double[::1] out = out_arr
    with nogil:
        for i in range(n):
            for j in range(p):
                r = y[i, j]
                for h in range(H):
                    r -= eta[i, h] * lam[j, h]
                out[j] += r * r
    return out_arr
