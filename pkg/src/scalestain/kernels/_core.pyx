# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels. Must stay byte-identical to kernels._numpy: same
expression trees, same half-up rounding, edge blocks via clamped indices
(equivalent to edge replication)."""

import numpy as np

cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()


def avg_pool2(img):
    a = np.ascontiguousarray(img)
    if a.ndim == 2:
        a = a[:, :, None]
        squeeze = True
    else:
        squeeze = False
    cdef const unsigned char[:, :, ::1] src = a
    cdef Py_ssize_t h = src.shape[0], w = src.shape[1], nc = src.shape[2]
    cdef Py_ssize_t h2 = (h + 1) // 2, w2 = (w + 1) // 2
    out_arr = np.empty((h2, w2, nc), np.uint8)
    cdef unsigned char[:, :, ::1] out = out_arr
    cdef Py_ssize_t i, j, c, y0, y1, x0, x1
    cdef unsigned int s
    for i in range(h2):
        y0 = 2 * i
        y1 = y0 + 1 if y0 + 1 < h else y0
        for j in range(w2):
            x0 = 2 * j
            x1 = x0 + 1 if x0 + 1 < w else x0
            for c in range(nc):
                s = src[y0, x0, c] + src[y0, x1, c] + src[y1, x0, c] + src[y1, x1, c]
                out[i, j, c] = <unsigned char>((s + 2) // 4)
    if squeeze:
        return out_arr[:, :, 0]
    return out_arr


def max_pool2(plane):
    cdef const unsigned char[:, ::1] src = np.ascontiguousarray(plane)
    cdef Py_ssize_t h = src.shape[0], w = src.shape[1]
    cdef Py_ssize_t h2 = (h + 1) // 2, w2 = (w + 1) // 2
    out_arr = np.empty((h2, w2), np.uint8)
    cdef unsigned char[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, y0, y1, x0, x1
    cdef unsigned char m, v
    for i in range(h2):
        y0 = 2 * i
        y1 = y0 + 1 if y0 + 1 < h else y0
        for j in range(w2):
            x0 = 2 * j
            x1 = x0 + 1 if x0 + 1 < w else x0
            m = src[y0, x0]
            v = src[y0, x1]
            if v > m:
                m = v
            v = src[y1, x0]
            if v > m:
                m = v
            v = src[y1, x1]
            if v > m:
                m = v
            out[i, j] = m
    return out_arr


def density_u8(rgb, lut):
    cdef const unsigned char[:, :, ::1] src = np.ascontiguousarray(rgb)
    cdef const double[:, ::1] tab = np.ascontiguousarray(lut, np.float64)
    cdef Py_ssize_t h = src.shape[0], w = src.shape[1]
    out_arr = np.empty((h, w), np.uint8)
    cdef unsigned char[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double d
    for i in range(h):
        for j in range(w):
            d = tab[0, src[i, j, 0]] + tab[1, src[i, j, 1]] + tab[2, src[i, j, 2]]
            if d < 0.0:
                d = 0.0
            elif d > 1.0:
                d = 1.0
            out[i, j] = <unsigned char>floor(255.0 * d + 0.5)
    return out_arr


def blend_u8(orig, dens, target, double b_eff):
    cdef const unsigned char[:, :, ::1] src = np.ascontiguousarray(orig)
    cdef const unsigned char[:, ::1] dn = np.ascontiguousarray(dens)
    cdef Py_ssize_t h = src.shape[0], w = src.shape[1]
    out_arr = np.empty((h, w, 3), np.uint8)
    cdef unsigned char[:, :, ::1] out = out_arr
    cdef double t0 = float(target[0]), t1 = float(target[1]), t2 = float(target[2])
    cdef double tc[3]
    tc[0] = t0
    tc[1] = t1
    tc[2] = t2
    cdef Py_ssize_t i, j, c
    cdef double d, oc, ov, f, imp, v
    cdef bint low = b_eff <= 0.5
    if low:
        f = b_eff * 2.0
    else:
        f = (b_eff - 0.5) * 2.0
    for i in range(h):
        for j in range(w):
            d = dn[i, j] * (1.0 / 255.0)
            for c in range(3):
                oc = src[i, j, c]
                ov = d * tc[c] + (1.0 - d) * oc
                if low:
                    v = (1.0 - f) * oc + f * ov
                else:
                    imp = (1.0 - d) * 255.0 + d * tc[c]
                    v = (1.0 - f) * ov + f * imp
                out[i, j, c] = <unsigned char>floor(v + 0.5)
    return out_arr
