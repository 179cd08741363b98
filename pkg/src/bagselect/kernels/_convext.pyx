# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled conv kernels: direct loops over the 5x5 windows."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def conv2d_forward(cnp.float64_t[:, :, :, ::1] x, cnp.float64_t[:, :, :, ::1] w):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t f = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t oh = h - kh + 1, ow = wd - kw + 1
    out_arr = np.zeros((n, f, oh, ow), dtype=np.float64)
    cdef cnp.float64_t[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t b, j, ch, i, q, p, r
    cdef cnp.float64_t acc
    for b in range(n):
        for j in range(f):
            for i in range(oh):
                for q in range(ow):
                    acc = 0.0
                    for ch in range(c):
                        for p in range(kh):
                            for r in range(kw):
                                acc += x[b, ch, i + p, q + r] * w[j, ch, p, r]
                    out[b, j, i, q] = acc
    return out_arr


def conv2d_backward(cnp.float64_t[:, :, :, ::1] x, cnp.float64_t[:, :, :, ::1] w,
                    cnp.float64_t[:, :, :, ::1] gout):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t f = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t oh = h - kh + 1, ow = wd - kw + 1
    gx_arr = np.zeros((n, c, h, wd), dtype=np.float64)
    gw_arr = np.zeros((f, c, kh, kw), dtype=np.float64)
    cdef cnp.float64_t[:, :, :, ::1] gx = gx_arr
    cdef cnp.float64_t[:, :, :, ::1] gw = gw_arr
    cdef Py_ssize_t b, j, ch, i, q, p, r
    cdef cnp.float64_t g
    for b in range(n):
        for j in range(f):
            for i in range(oh):
                for q in range(ow):
                    g = gout[b, j, i, q]
                    for ch in range(c):
                        for p in range(kh):
                            for r in range(kw):
                                gx[b, ch, i + p, q + r] += g * w[j, ch, p, r]
                                gw[j, ch, p, r] += g * x[b, ch, i + p, q + r]
    return gx_arr, gw_arr
