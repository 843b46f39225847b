# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the numpy kernels in scalevo.kernels."""

from libc.math cimport INFINITY, fabs, sqrt

import numpy as np


cdef double _TINY_W = 1e-12


cdef inline double _transfer_sq(const double[:, ::1] M, double px, double py,
                                double qx, double qy) nogil:
    cdef double hx = M[0, 0] * px + M[0, 1] * py + M[0, 2]
    cdef double hy = M[1, 0] * px + M[1, 1] * py + M[1, 2]
    cdef double w = M[2, 0] * px + M[2, 1] * py + M[2, 2]
    if fabs(w) <= _TINY_W * (1.0 + sqrt(px * px + py * py)):
        return INFINITY
    cdef double dx = hx / w - qx
    cdef double dy = hy / w - qy
    return dx * dx + dy * dy


def symmetric_transfer_errors(const double[:, ::1] H, const double[:, ::1] H_inv,
                              const double[:, ::1] x1, const double[:, ::1] x2):
    cdef Py_ssize_t n = x1.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    cdef double fwd, bwd
    with nogil:
        for i in range(n):
            fwd = _transfer_sq(H, x1[i, 0], x1[i, 1], x2[i, 0], x2[i, 1])
            bwd = _transfer_sq(H_inv, x2[i, 0], x2[i, 1], x1[i, 0], x1[i, 1])
            out[i] = sqrt(fwd + bwd)
    return out_arr


cdef inline double _huber(double r, double r0) nogil:
    if r <= r0:
        return 0.5 * r * r
    return r0 * (r - 0.5 * r0)


def symmetric_huber_cost(const double[:, ::1] H12, const double[:, ::1] H21,
                         const double[:, ::1] x1, const double[:, ::1] x2,
                         double r0):
    cdef Py_ssize_t n = x1.shape[0]
    cdef Py_ssize_t i
    cdef double fwd, bwd, total = 0.0
    with nogil:
        for i in range(n):
            fwd = _transfer_sq(H12, x1[i, 0], x1[i, 1], x2[i, 0], x2[i, 1])
            bwd = _transfer_sq(H21, x2[i, 0], x2[i, 1], x1[i, 0], x1[i, 1])
            if fwd == INFINITY or bwd == INFINITY:
                total = INFINITY
                break
            total += _huber(sqrt(fwd), r0) + _huber(sqrt(bwd), r0)
    return total


def sampson_errors(const double[:, ::1] F, const double[:, ::1] x1,
                   const double[:, ::1] x2):
    cdef Py_ssize_t n = x1.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    cdef double fx, fy, fw, gx, gy, gw, num, den
    with nogil:
        for i in range(n):
            # F @ (x1, 1)
            fx = F[0, 0] * x1[i, 0] + F[0, 1] * x1[i, 1] + F[0, 2]
            fy = F[1, 0] * x1[i, 0] + F[1, 1] * x1[i, 1] + F[1, 2]
            fw = F[2, 0] * x1[i, 0] + F[2, 1] * x1[i, 1] + F[2, 2]
            # F^T @ (x2, 1)
            gx = F[0, 0] * x2[i, 0] + F[1, 0] * x2[i, 1] + F[2, 0]
            gy = F[0, 1] * x2[i, 0] + F[1, 1] * x2[i, 1] + F[2, 1]
            gw = F[0, 2] * x2[i, 0] + F[1, 2] * x2[i, 1] + F[2, 2]
            num = x2[i, 0] * fx + x2[i, 1] * fy + fw
            den = fx * fx + fy * fy + gx * gx + gy * gy
            if den <= 1e-300:
                out[i] = INFINITY
            else:
                out[i] = sqrt(num * num / den)
    return out_arr
