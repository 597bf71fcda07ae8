# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled pair-contraction kernels (GIL released in the inner loops)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, cos, sin, M_PI
from libc.stdlib cimport malloc, free

cnp.import_array()


cdef inline void _green(double r, double kappa, double *gr, double *gi) noexcept nogil:
    cdef double s = 1.0 / (4.0 * M_PI * r)
    if kappa == 0.0:
        gr[0] = s
        gi[0] = 0.0
    else:
        gr[0] = cos(kappa * r) * s
        gi[0] = -sin(kappa * r) * s


cdef void _regular(const double[:, :, ::1] X1, const double[:, :, ::1] X2,
                   const double[:, :, :, ::1] V1, const double[:, :, :, ::1] V2,
                   const double[:, :, ::1] Gr, const double[:, :, ::1] Gi,
                   double[:, :, ::1] outr, double[:, :, ::1] outi) noexcept nogil:
    cdef Py_ssize_t K = V1.shape[0], Q1 = V1.shape[1], n1 = V1.shape[2], c = V1.shape[3]
    cdef Py_ssize_t Q2 = V2.shape[1], n2 = V2.shape[2]
    cdef Py_ssize_t k, a, b, i, j, d
    cdef double tr, ti, v
    cdef double *Tr
    cdef double *Ti
    Tr = <double *> malloc(n2 * c * sizeof(double))
    Ti = <double *> malloc(n2 * c * sizeof(double))
    for k in range(K):
        for a in range(Q1):
            for j in range(n2 * c):
                Tr[j] = 0.0
                Ti[j] = 0.0
            for b in range(Q2):
                tr = Gr[k, a, b]
                ti = Gi[k, a, b]
                for j in range(n2):
                    for d in range(c):
                        v = V2[k, b, j, d]
                        Tr[j * c + d] += tr * v
                        Ti[j * c + d] += ti * v
            for i in range(n1):
                for j in range(n2):
                    tr = 0.0
                    ti = 0.0
                    for d in range(c):
                        v = V1[k, a, i, d]
                        tr += v * Tr[j * c + d]
                        ti += v * Ti[j * c + d]
                    outr[k, i, j] += tr
                    outi[k, i, j] += ti
    free(Tr)
    free(Ti)


def regular_pairs(X1, X2, VL1, VL2, VP1, VP2, double kappa):
    cdef const double[:, :, ::1] x1 = np.ascontiguousarray(X1, dtype=np.float64)
    cdef const double[:, :, ::1] x2 = np.ascontiguousarray(X2, dtype=np.float64)
    cdef Py_ssize_t K = x1.shape[0], Q1 = x1.shape[1], Q2 = x2.shape[1]
    cdef double[:, :, ::1] Gr = np.empty((K, Q1, Q2))
    cdef double[:, :, ::1] Gi = np.empty((K, Q1, Q2))
    cdef Py_ssize_t k, a, b
    cdef double r, dx, dy, dz
    with nogil:
        for k in range(K):
            for a in range(Q1):
                for b in range(Q2):
                    dx = x1[k, a, 0] - x2[k, b, 0]
                    dy = x1[k, a, 1] - x2[k, b, 1]
                    dz = x1[k, a, 2] - x2[k, b, 2]
                    r = sqrt(dx * dx + dy * dy + dz * dz)
                    _green(r, kappa, &Gr[k, a, b], &Gi[k, a, b])
    out = []
    for V1, V2 in ((VL1, VL2), (VP1, VP2)):
        v1 = np.ascontiguousarray(V1, dtype=np.float64)
        v2 = np.ascontiguousarray(V2, dtype=np.float64)
        re = np.zeros((K, v1.shape[2], v2.shape[2]))
        im = np.zeros_like(re)
        _run_regular(x1, x2, v1, v2, Gr, Gi, re, im)
        out.append(re + 1j * im)
    return out[0], out[1]


cdef void _run_regular(const double[:, :, ::1] x1, const double[:, :, ::1] x2,
                       const double[:, :, :, ::1] v1, const double[:, :, :, ::1] v2,
                       const double[:, :, ::1] Gr, const double[:, :, ::1] Gi,
                       double[:, :, ::1] re, double[:, :, ::1] im):
    with nogil:
        _regular(x1, x2, v1, v2, Gr, Gi, re, im)


cdef void _pointwise(const double[:, :, ::1] X, const double[:, :, ::1] Y,
                     const double[:, :, :, ::1] V1, const double[:, :, :, ::1] V2,
                     double kappa, double[:, :, ::1] outr, double[:, :, ::1] outi) noexcept nogil:
    cdef Py_ssize_t K = V1.shape[0], R = V1.shape[1], n1 = V1.shape[2], c = V1.shape[3]
    cdef Py_ssize_t n2 = V2.shape[2]
    cdef Py_ssize_t k, q, i, j, d
    cdef double r, dx, dy, dz, gr, gi, s
    for k in range(K):
        for q in range(R):
            dx = X[k, q, 0] - Y[k, q, 0]
            dy = X[k, q, 1] - Y[k, q, 1]
            dz = X[k, q, 2] - Y[k, q, 2]
            r = sqrt(dx * dx + dy * dy + dz * dz)
            _green(r, kappa, &gr, &gi)
            for i in range(n1):
                for j in range(n2):
                    s = 0.0
                    for d in range(c):
                        s += V1[k, q, i, d] * V2[k, q, j, d]
                    outr[k, i, j] += gr * s
                    outi[k, i, j] += gi * s


def pointwise_pairs(X, Y, VL1, VL2, VP1, VP2, double kappa):
    cdef const double[:, :, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[:, :, ::1] y = np.ascontiguousarray(Y, dtype=np.float64)
    out = []
    for V1, V2 in ((VL1, VL2), (VP1, VP2)):
        v1 = np.ascontiguousarray(V1, dtype=np.float64)
        v2 = np.ascontiguousarray(V2, dtype=np.float64)
        re = np.zeros((v1.shape[0], v1.shape[2], v2.shape[2]))
        im = np.zeros_like(re)
        _run_pointwise(x, y, v1, v2, kappa, re, im)
        out.append(re + 1j * im)
    return out[0], out[1]


cdef void _run_pointwise(const double[:, :, ::1] x, const double[:, :, ::1] y,
                         const double[:, :, :, ::1] v1, const double[:, :, :, ::1] v2,
                         double kappa, double[:, :, ::1] re, double[:, :, ::1] im):
    with nogil:
        _pointwise(x, y, v1, v2, kappa, re, im)
