# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: symmetric-function DP, cyclic Jacobi eigensolver,
tangency projection and the certificate excess.  Same API and algorithms as
s2wb._kernels_py."""
import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()

BACKEND = "compiled"

_JACOBI_MAX_SWEEPS = 50
_JACOBI_OFF_TOL = 1e-14


def esp_batch(vals):
    cdef cnp.ndarray[double, ndim=2, mode="c"] v = np.ascontiguousarray(vals, dtype=np.float64)
    cdef Py_ssize_t b = v.shape[0], n = v.shape[1]
    cdef cnp.ndarray[double, ndim=2, mode="c"] e = np.zeros((b, n + 1))
    cdef Py_ssize_t r, i, j, top
    cdef double x
    for r in range(b):
        e[r, 0] = 1.0
        for i in range(n):
            x = v[r, i]
            top = i + 1 if i + 1 < n else n
            for j in range(top, 0, -1):
                e[r, j] += x * e[r, j - 1]
    return e


def esp_drop1_batch(vals):
    cdef cnp.ndarray[double, ndim=2, mode="c"] v = np.ascontiguousarray(vals, dtype=np.float64)
    cdef Py_ssize_t b = v.shape[0], n = v.shape[1]
    cdef cnp.ndarray[double, ndim=3, mode="c"] out = np.zeros((b, n, n))
    cdef Py_ssize_t r, i, col, j, used, top
    cdef double x
    for r in range(b):
        for i in range(n):
            out[r, i, 0] = 1.0
            used = 0
            for col in range(n):
                if col == i:
                    continue
                x = v[r, col]
                used += 1
                top = used if used < n - 1 else n - 1
                for j in range(top, 0, -1):
                    out[r, i, j] += x * out[r, i, j - 1]
    return out


cdef int _jacobi_single(double[:, ::1] a, double[:, ::1] vec, Py_ssize_t d,
                        int max_sweeps, double off_tol) nogil:
    cdef Py_ssize_t p, q, k, sweep
    cdef double off, thr, scale, apq, theta, t, c, s, akp, akq
    scale = 1.0
    for p in range(d):
        for q in range(d):
            if fabs(a[p, q]) > scale:
                scale = fabs(a[p, q])
    thr = off_tol * scale
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(d - 1):
            for q in range(p + 1, d):
                if fabs(a[p, q]) > off:
                    off = fabs(a[p, q])
        if off <= thr:
            return 0
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + sqrt(theta * theta + 1.0))
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                for k in range(d):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(d):
                    akp = a[p, k]
                    akq = a[q, k]
                    a[p, k] = c * akp - s * akq
                    a[q, k] = s * akp + c * akq
                for k in range(d):
                    akp = vec[k, p]
                    akq = vec[k, q]
                    vec[k, p] = c * akp - s * akq
                    vec[k, q] = s * akp + c * akq
    off = 0.0
    for p in range(d - 1):
        for q in range(p + 1, d):
            if fabs(a[p, q]) > off:
                off = fabs(a[p, q])
    return 0 if off <= thr else 1


def jacobi_eigh_batch(mats, int max_sweeps=_JACOBI_MAX_SWEEPS, double off_tol=_JACOBI_OFF_TOL):
    cdef cnp.ndarray[double, ndim=3, mode="c"] a = np.array(mats, dtype=np.float64, copy=True, order="C")
    cdef Py_ssize_t b = a.shape[0], d = a.shape[1]
    if a.shape[2] != d:
        raise ValueError("matrices must be square")
    cdef cnp.ndarray[double, ndim=3, mode="c"] v = np.zeros((b, d, d))
    cdef cnp.ndarray[double, ndim=2, mode="c"] w = np.empty((b, d))
    cdef Py_ssize_t r, k
    cdef int bad = 0
    for r in range(b):
        for k in range(d):
            v[r, k, k] = 1.0
    for r in range(b):
        bad |= _jacobi_single(a[r], v[r], d, max_sweeps, off_tol)
    if bad:
        raise RuntimeError("cyclic Jacobi did not converge within the sweep budget")
    for r in range(b):
        for k in range(d):
            w[r, k] = a[r, k, k]
    return w, v


def jacobi_eigh(mat, int max_sweeps=_JACOBI_MAX_SWEEPS, double off_tol=_JACOBI_OFF_TOL):
    w, v = jacobi_eigh_batch(np.asarray(mat, dtype=np.float64)[None], max_sweeps, off_tol)
    return w[0], v[0]


def tangency_project(f, c):
    cdef cnp.ndarray[double, ndim=2, mode="c"] fv = np.ascontiguousarray(f, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=4, mode="c"] out = np.array(c, dtype=np.float64, copy=True, order="C")
    cdef Py_ssize_t b = fv.shape[0], n = fv.shape[1]
    cdef Py_ssize_t r, i, k
    cdef double df2, rk, sk, w
    for r in range(b):
        df2 = 0.0
        for i in range(n):
            df2 += fv[r, i] * fv[r, i]
        for k in range(n):
            rk = 0.0
            for i in range(n):
                rk += fv[r, i] * out[r, i, i, k]
            sk = rk / ((df2 + 2.0 * fv[r, k] * fv[r, k]) / 3.0)
            for i in range(n):
                if i == k:
                    continue
                w = (fv[r, i] / 3.0) * sk
                out[r, i, i, k] -= w
                out[r, i, k, i] -= w
                out[r, k, i, i] -= w
            out[r, k, k, k] -= fv[r, k] * sk
    return out


def excess_batch(lam, c, double shift, double delta):
    cdef cnp.ndarray[double, ndim=2, mode="c"] lv = np.ascontiguousarray(lam, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=4, mode="c"] cv = np.ascontiguousarray(c, dtype=np.float64)
    cdef Py_ssize_t b = lv.shape[0], n = lv.shape[1]
    cdef cnp.ndarray[double, ndim=1, mode="c"] out = np.empty(b)
    cdef Py_ssize_t r, i, j, k
    cdef double s1, denom, total, d_i, fi, acc
    for r in range(b):
        s1 = 0.0
        for i in range(n):
            s1 += lv[r, i]
        denom = s1 + shift
        total = 0.0
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    total += cv[r, i, j, k] * cv[r, i, j, k]
        acc = total
        for i in range(n):
            d_i = 0.0
            for k in range(n):
                d_i += cv[r, k, k, i]
            fi = s1 - lv[r, i]
            acc -= (1.0 + delta * fi / denom) * d_i * d_i
        out[r] = acc / denom
    return out
