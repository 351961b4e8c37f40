# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled 3x3 convolution kernels.

Mirrors kernels_numpy exactly: (H, W, C) float64 maps, (3, 3, Cin, Cout)
weights, fixed padding of 1. The tap loops are hoisted outside the pixel
loops so the innermost channel loops vectorize.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


cdef inline int _lo(int d, int stride) noexcept nogil:
    cdef int v = (1 - d + stride - 1) // stride
    return v if v > 0 else 0


cdef inline int _hi(int d, int stride, int n, int no) noexcept nogil:
    cdef int v = (n - d) // stride + 1
    return v if v < no else no


def conv3x3(x, w, b, int stride=1):
    cdef double[:, :, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, :, :, ::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef int h = xv.shape[0], wd = xv.shape[1], cin = xv.shape[2]
    cdef int cout = wv.shape[3]
    cdef int ho = (h - 1) // stride + 1, wo = (wd - 1) // stride + 1
    y = np.empty((ho, wo, cout), dtype=np.float64)
    cdef double[:, :, ::1] yv = y
    cdef int i, j, di, dj, ci, co, ii, jj, i0, i1, j0, j1
    cdef double acc
    with nogil:
        for i in range(ho):
            for j in range(wo):
                for co in range(cout):
                    yv[i, j, co] = bv[co]
        for di in range(3):
            i0 = _lo(di, stride)
            i1 = _hi(di, stride, h, ho)
            for dj in range(3):
                j0 = _lo(dj, stride)
                j1 = _hi(dj, stride, wd, wo)
                for i in range(i0, i1):
                    ii = i * stride + di - 1
                    for j in range(j0, j1):
                        jj = j * stride + dj - 1
                        for ci in range(cin):
                            acc = xv[ii, jj, ci]
                            for co in range(cout):
                                yv[i, j, co] += acc * wv[di, dj, ci, co]
    return y


def conv3x3_backward(x, w, gy, int stride=1):
    cdef double[:, :, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, :, :, ::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef double[:, :, ::1] gyv = np.ascontiguousarray(gy, dtype=np.float64)
    cdef int h = xv.shape[0], wd = xv.shape[1], cin = xv.shape[2]
    cdef int cout = wv.shape[3]
    cdef int ho = gyv.shape[0], wo = gyv.shape[1]
    gx = np.zeros((h, wd, cin), dtype=np.float64)
    gw = np.zeros((3, 3, cin, cout), dtype=np.float64)
    gb = np.zeros(cout, dtype=np.float64)
    cdef double[:, :, ::1] gxv = gx
    cdef double[:, :, :, ::1] gwv = gw
    cdef double[::1] gbv = gb
    cdef int i, j, di, dj, ci, co, ii, jj, i0, i1, j0, j1
    cdef double g, acc, xval
    with nogil:
        for i in range(ho):
            for j in range(wo):
                for co in range(cout):
                    gbv[co] += gyv[i, j, co]
        for di in range(3):
            i0 = _lo(di, stride)
            i1 = _hi(di, stride, h, ho)
            for dj in range(3):
                j0 = _lo(dj, stride)
                j1 = _hi(dj, stride, wd, wo)
                for i in range(i0, i1):
                    ii = i * stride + di - 1
                    for j in range(j0, j1):
                        jj = j * stride + dj - 1
                        for ci in range(cin):
                            xval = xv[ii, jj, ci]
                            acc = 0.0
                            for co in range(cout):
                                g = gyv[i, j, co]
                                acc += g * wv[di, dj, ci, co]
                                gwv[di, dj, ci, co] += xval * g
                            gxv[ii, jj, ci] += acc
    return gx, gw, gb
