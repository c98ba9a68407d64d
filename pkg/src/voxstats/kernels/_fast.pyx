# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: convolution, pooling, triple-product sums."""

import numpy as np

cimport numpy as cnp
from libc.math cimport M_PI, atan2, fmod, hypot

cnp.import_array()


def conv2d_forward(double[:, :, :, ::1] x, double[:, :, :, ::1] w,
                   double[::1] b):
    cdef Py_ssize_t nb = x.shape[0], h = x.shape[1], wd = x.shape[2]
    cdef Py_ssize_t ci = x.shape[3]
    cdef Py_ssize_t kh = w.shape[0], kw = w.shape[1], co = w.shape[3]
    cdef Py_ssize_t ho = h - kh + 1, wo = wd - kw + 1
    y_arr = np.empty((nb, ho, wo, co), dtype=np.float64)
    cdef double[:, :, :, ::1] y = y_arr
    cdef Py_ssize_t n, i, j, p, q, c, o
    cdef double xv
    with nogil:
        for n in range(nb):
            for i in range(ho):
                for j in range(wo):
                    for o in range(co):
                        y[n, i, j, o] = b[o]
                    for p in range(kh):
                        for q in range(kw):
                            for c in range(ci):
                                xv = x[n, i + p, j + q, c]
                                for o in range(co):
                                    y[n, i, j, o] += xv * w[p, q, c, o]
    return y_arr


def conv2d_backward(double[:, :, :, ::1] x, double[:, :, :, ::1] w,
                    double[:, :, :, ::1] dy):
    cdef Py_ssize_t nb = x.shape[0], h = x.shape[1], wd = x.shape[2]
    cdef Py_ssize_t ci = x.shape[3]
    cdef Py_ssize_t kh = w.shape[0], kw = w.shape[1], co = w.shape[3]
    cdef Py_ssize_t ho = dy.shape[1], wo = dy.shape[2]
    dx_arr = np.zeros((nb, h, wd, ci), dtype=np.float64)
    dw_arr = np.zeros((kh, kw, ci, co), dtype=np.float64)
    db_arr = np.zeros(co, dtype=np.float64)
    cdef double[:, :, :, ::1] dx = dx_arr
    cdef double[:, :, :, ::1] dw = dw_arr
    cdef double[::1] db = db_arr
    cdef Py_ssize_t n, i, j, p, q, c, o
    cdef double g
    with nogil:
        for n in range(nb):
            for i in range(ho):
                for j in range(wo):
                    for o in range(co):
                        db[o] += dy[n, i, j, o]
                    for p in range(kh):
                        for q in range(kw):
                            for c in range(ci):
                                g = 0.0
                                for o in range(co):
                                    g += dy[n, i, j, o] * w[p, q, c, o]
                                    dw[p, q, c, o] += (
                                        x[n, i + p, j + q, c] * dy[n, i, j, o]
                                    )
                                dx[n, i + p, j + q, c] += g
    return dx_arr, dw_arr, db_arr


def maxpool2_forward(double[:, :, :, ::1] x):
    cdef Py_ssize_t nb = x.shape[0], h = x.shape[1], wd = x.shape[2]
    cdef Py_ssize_t ch = x.shape[3]
    if h % 2 or wd % 2:
        raise ValueError("maxpool2 requires even spatial dimensions")
    cdef Py_ssize_t ho = h // 2, wo = wd // 2
    y_arr = np.empty((nb, ho, wo, ch), dtype=np.float64)
    s_arr = np.empty((nb, ho, wo, ch), dtype=np.int64)
    cdef double[:, :, :, ::1] y = y_arr
    cdef long long[:, :, :, ::1] sw = s_arr
    cdef Py_ssize_t n, i, j, c, p, q, bi, bj
    cdef double best, v
    cdef Py_ssize_t besti, bestj
    with nogil:
        for n in range(nb):
            for i in range(ho):
                for j in range(wo):
                    for c in range(ch):
                        best = x[n, 2 * i, 2 * j, c]
                        besti = 2 * i
                        bestj = 2 * j
                        for p in range(2):
                            for q in range(2):
                                bi = 2 * i + p
                                bj = 2 * j + q
                                v = x[n, bi, bj, c]
                                if v > best:
                                    best = v
                                    besti = bi
                                    bestj = bj
                        y[n, i, j, c] = best
                        sw[n, i, j, c] = besti * wd + bestj
    return y_arr, s_arr


def maxpool2_backward(double[:, :, :, ::1] dy, long long[:, :, :, ::1] sw,
                      Py_ssize_t h, Py_ssize_t w):
    cdef Py_ssize_t nb = dy.shape[0], ho = dy.shape[1], wo = dy.shape[2]
    cdef Py_ssize_t ch = dy.shape[3]
    dx_arr = np.zeros((nb, h, w, ch), dtype=np.float64)
    cdef double[:, :, :, ::1] dx = dx_arr
    cdef Py_ssize_t n, i, j, c
    cdef long long s
    with nogil:
        for n in range(nb):
            for i in range(ho):
                for j in range(wo):
                    for c in range(ch):
                        s = sw[n, i, j, c]
                        dx[n, s // w, s % w, c] += dy[n, i, j, c]
    return dx_arr


cdef inline double wrap_angle(double a) nogil:
    # Wrap to (-pi, pi]; mirrors the numpy reference branch for exactness.
    cdef double v = fmod(a + M_PI, 2.0 * M_PI)
    if v < 0.0:
        v += 2.0 * M_PI
    if v == 0.0:
        v = 2.0 * M_PI
    return v - M_PI


def bicoherence_sums(double complex[:, ::1] spectra, Py_ssize_t grid):
    cdef Py_ssize_t k = spectra.shape[0], m = spectra.shape[1]
    if m < 2 * grid - 1:
        raise ValueError("segment spectrum too short for the requested grid")
    mag_arr = np.zeros((grid, grid), dtype=np.float64)
    ph_arr = np.zeros((grid, grid), dtype=np.float64)
    mags_arr = np.empty(m, dtype=np.float64)
    angs_arr = np.empty(m, dtype=np.float64)
    cdef double[:, ::1] mag_sum = mag_arr
    cdef double[:, ::1] ph_sum = ph_arr
    cdef double[::1] mags = mags_arr
    cdef double[::1] angs = angs_arr
    cdef Py_ssize_t s, k1, k2, i
    cdef double complex v
    with nogil:
        for s in range(k):
            for i in range(m):
                v = spectra[s, i]
                mags[i] = hypot(v.real, v.imag)
                angs[i] = atan2(v.imag, v.real)
            for k1 in range(grid):
                for k2 in range(grid):
                    mag_sum[k1, k2] += mags[k1] * mags[k2] * mags[k1 + k2]
                    ph_sum[k1, k2] += wrap_angle(
                        angs[k1] + angs[k2] - angs[k1 + k2]
                    )
    return mag_arr, ph_arr
