# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: dual SVM pairwise solver and t-SNE gradient.

Mirrors _kernels_py exactly in selection and update rules; the compiled
path is the default when built.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, log

cnp.import_array()

BACKEND_NAME = "compiled"

cdef double _TAU = 1e-12


def smo_solve(K, y, double C, double tol, long max_iter):
    """See _kernels_py.smo_solve; identical contract and iteration path."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Karr = np.ascontiguousarray(K, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] yarr = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = yarr.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Q = Karr * np.outer(yarr, yarr)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] alpha = np.zeros(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] G = -np.ones(n)

    cdef double[:, ::1] Qv = Q
    cdef double[::1] av = alpha
    cdef double[::1] Gv = G
    cdef double[::1] yv = yarr

    cdef long it = 0
    cdef bint converged = False
    cdef Py_ssize_t i, j, t
    cdef double vmax, vmin, v
    cdef double ai, aj, ai_old, aj_old, quad, delta, diff, total, dai, daj
    cdef double b, hi, lo
    cdef Py_ssize_t n_free

    while it < max_iter:
        i = -1
        j = -1
        vmax = -INFINITY
        vmin = INFINITY
        for t in range(n):
            v = -yv[t] * Gv[t]
            if (yv[t] > 0 and av[t] < C) or (yv[t] < 0 and av[t] > 0):
                if v > vmax:
                    vmax = v
                    i = t
            if (yv[t] < 0 and av[t] < C) or (yv[t] > 0 and av[t] > 0):
                if v < vmin:
                    vmin = v
                    j = t
        if i < 0 or j < 0 or vmax - vmin <= tol:
            converged = True
            break

        ai_old = av[i]
        aj_old = av[j]
        if yv[i] != yv[j]:
            quad = Qv[i, i] + Qv[j, j] + 2.0 * Qv[i, j]
            if quad <= 0.0:
                quad = _TAU
            delta = (-Gv[i] - Gv[j]) / quad
            diff = ai_old - aj_old
            ai = ai_old + delta
            aj = aj_old + delta
            if diff > 0.0:
                if aj < 0.0:
                    aj = 0.0
                    ai = diff
            else:
                if ai < 0.0:
                    ai = 0.0
                    aj = -diff
            if diff > 0.0:
                if ai > C:
                    ai = C
                    aj = C - diff
            else:
                if aj > C:
                    aj = C
                    ai = C + diff
        else:
            quad = Qv[i, i] + Qv[j, j] - 2.0 * Qv[i, j]
            if quad <= 0.0:
                quad = _TAU
            delta = (Gv[i] - Gv[j]) / quad
            total = ai_old + aj_old
            ai = ai_old - delta
            aj = aj_old + delta
            if total > C:
                if ai > C:
                    ai = C
                    aj = total - C
            else:
                if aj < 0.0:
                    aj = 0.0
                    ai = total
            if total > C:
                if aj > C:
                    aj = C
                    ai = total - C
            else:
                if ai < 0.0:
                    ai = 0.0
                    aj = total

        dai = ai - ai_old
        daj = aj - aj_old
        av[i] = ai
        av[j] = aj
        for t in range(n):
            Gv[t] = (Gv[t] + Qv[i, t] * dai) + Qv[j, t] * daj
        it += 1

    n_free = 0
    b = 0.0
    for t in range(n):
        if av[t] > 0.0 and av[t] < C:
            b += -yv[t] * Gv[t]
            n_free += 1
    if n_free > 0:
        b /= n_free
    else:
        hi = -INFINITY
        lo = INFINITY
        for t in range(n):
            v = -yv[t] * Gv[t]
            if (yv[t] > 0 and av[t] < C) or (yv[t] < 0 and av[t] > 0):
                if v > hi:
                    hi = v
            if (yv[t] < 0 and av[t] < C) or (yv[t] > 0 and av[t] > 0):
                if v < lo:
                    lo = v
        b = (hi + lo) / 2.0
    return alpha, b, it, converged


def tsne_step(Y, P):
    """See _kernels_py.tsne_step."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Yarr = np.ascontiguousarray(Y, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Parr = np.ascontiguousarray(P, dtype=np.float64)
    cdef Py_ssize_t n = Yarr.shape[0]
    cdef Py_ssize_t d = Yarr.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] W = np.empty((n, n))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] grad = np.zeros((n, d))

    cdef double[:, ::1] Yv = Yarr
    cdef double[:, ::1] Pv = Parr
    cdef double[:, ::1] Wv = W
    cdef double[:, ::1] gv = grad

    cdef Py_ssize_t i, j, k
    cdef double dist, diff, Z = 0.0, q, m, kl = 0.0

    for i in range(n):
        Wv[i, i] = 0.0
        for j in range(i + 1, n):
            dist = 0.0
            for k in range(d):
                diff = Yv[i, k] - Yv[j, k]
                dist += diff * diff
            q = 1.0 / (1.0 + dist)
            Wv[i, j] = q
            Wv[j, i] = q
            Z += 2.0 * q

    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            q = Wv[i, j] / Z
            if q < 1e-300:
                q = 1e-300
            m = (Pv[i, j] - q) * Wv[i, j]
            for k in range(d):
                gv[i, k] += 4.0 * m * (Yv[i, k] - Yv[j, k])
            if Pv[i, j] > 0.0:
                kl += Pv[i, j] * log(Pv[i, j] / q)
    return grad, kl
