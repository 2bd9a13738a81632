# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: projected SOR sweeps, stencil application, and the
all-pairs seminorm scan.  Signatures mirror _core_py exactly."""

import numpy as np

cimport cython
cimport numpy as cnp

cnp.import_array()


def psor_sweep(a, b, lower, u, double omega, bint reverse):
    cdef double[:, ::1] a_v = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[::1] b_v = np.ascontiguousarray(b, dtype=np.float64)
    cdef double[::1] lo_v = np.ascontiguousarray(lower, dtype=np.float64)
    cdef double[::1] u_v = u
    cdef Py_ssize_t n = a_v.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double r, new, change, biggest = 0.0
    for k in range(n):
        i = n - 1 - k if reverse else k
        r = b_v[i]
        for j in range(n):
            r -= a_v[i, j] * u_v[j]
        new = u_v[i] + omega * r / a_v[i, i]
        if new < lo_v[i]:
            new = lo_v[i]
        change = new - u_v[i]
        if change < 0:
            change = -change
        if change > biggest:
            biggest = change
        u_v[i] = new
    return biggest


def stencil_apply_1d(padded, w_even, w_odd, Py_ssize_t n, Py_ssize_t pad):
    cdef double[::1] p_v = np.ascontiguousarray(padded, dtype=np.float64)
    cdef double[::1] we_v = np.ascontiguousarray(w_even, dtype=np.float64)
    cdef double[::1] wo_v = np.ascontiguousarray(w_odd, dtype=np.float64)
    cdef Py_ssize_t m = we_v.shape[0]
    out_arr = np.zeros(n)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, k
    cdef double u0, up, um, acc
    cdef bint use_odd = False
    for k in range(m):
        if wo_v[k] != 0.0:
            use_odd = True
            break
    for i in range(n):
        u0 = p_v[pad + i]
        acc = 0.0
        for k in range(1, m + 1):
            up = p_v[pad + i + k]
            um = p_v[pad + i - k]
            acc += we_v[k - 1] * (up + um - 2.0 * u0)
            if use_odd:
                acc += wo_v[k - 1] * (up - um)
        out[i] = acc
    return out_arr


def stencil_apply_2d(padded, offsets, w_even, w_odd,
                     Py_ssize_t n0, Py_ssize_t n1,
                     Py_ssize_t pad0, Py_ssize_t pad1):
    cdef double[:, ::1] p_v = np.ascontiguousarray(padded, dtype=np.float64)
    cdef cnp.int64_t[:, ::1] off_v = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef double[::1] we_v = np.ascontiguousarray(w_even, dtype=np.float64)
    cdef double[::1] wo_v = np.ascontiguousarray(w_odd, dtype=np.float64)
    cdef Py_ssize_t m = we_v.shape[0]
    out_arr = np.zeros((n0, n1))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, k, o0, o1
    cdef double u0, up, um, acc
    cdef bint use_odd = False
    for k in range(m):
        if wo_v[k] != 0.0:
            use_odd = True
            break
    for i in range(n0):
        for j in range(n1):
            u0 = p_v[pad0 + i, pad1 + j]
            acc = 0.0
            for k in range(m):
                o0 = off_v[k, 0]
                o1 = off_v[k, 1]
                up = p_v[pad0 + i + o0, pad1 + j + o1]
                um = p_v[pad0 + i - o0, pad1 + j - o1]
                acc += we_v[k] * (up + um - 2.0 * u0)
                if use_odd:
                    acc += wo_v[k] * (up - um)
            out[i, j] = acc
    return out_arr


def allpairs_max_ratio(w, space, time, double beta, double tpow, chunk=None):
    cdef double[::1] w_v = np.ascontiguousarray(w, dtype=np.float64)
    cdef double[:, ::1] s_v = np.ascontiguousarray(space, dtype=np.float64)
    cdef bint has_time = time is not None
    cdef double[::1] t_v
    if has_time:
        t_v = np.ascontiguousarray(time, dtype=np.float64)
    else:
        t_v = np.zeros(1)
    cdef Py_ssize_t m = w_v.shape[0]
    cdef Py_ssize_t d = s_v.shape[1]
    cdef Py_ssize_t i, j, a
    cdef double best = 0.0, dw, d2, denom, ratio, diff
    cdef Py_ssize_t bi = 0, bj = 0
    for i in range(m):
        for j in range(i + 1, m):
            dw = w_v[i] - w_v[j]
            if dw < 0:
                dw = -dw
            if dw == 0.0:
                continue
            d2 = 0.0
            for a in range(d):
                diff = s_v[i, a] - s_v[j, a]
                d2 += diff * diff
            denom = d2 ** (beta / 2.0)
            if has_time:
                diff = t_v[i] - t_v[j]
                if diff < 0:
                    diff = -diff
                denom += diff ** tpow
            if denom <= 0.0:
                continue
            ratio = dw / denom
            if ratio > best:
                best = ratio
                bi = i
                bj = j
    return best, bi, bj
