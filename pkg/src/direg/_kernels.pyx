# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: probe-pair squared differences and grid NW smoothing."""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor, ceil, fabs

cnp.import_array()


def mean_sq_diff(const double[:, ::1] values, const cnp.int64_t[::1] ip, const cnp.int64_t[::1] im):
    """Mean over rows j and pairs i of (values[j, ip[i]] - values[j, im[i]])**2."""
    cdef Py_ssize_t n = values.shape[0]
    cdef Py_ssize_t k = ip.shape[0]
    cdef Py_ssize_t j, i
    cdef double acc = 0.0, row, d
    if n == 0 or k == 0:
        raise ValueError("empty input")
    with nogil:
        for j in range(n):
            row = 0.0
            for i in range(k):
                d = values[j, ip[i]] - values[j, im[i]]
                row = row + d * d
            acc = acc + row
    return acc / (<double>n * <double>k)


def mean_cross_diff(const double[:, ::1] values, const cnp.int64_t[::1] i0,
                    const cnp.int64_t[::1] i1, const cnp.int64_t[::1] i2):
    """Mean of (v[i0] - v[i1]) * (v[i1] - v[i2]) over rows and triples."""
    cdef Py_ssize_t n = values.shape[0]
    cdef Py_ssize_t k = i0.shape[0]
    cdef Py_ssize_t j, i
    cdef double acc = 0.0, row, a, b
    if n == 0 or k == 0:
        raise ValueError("empty input")
    with nogil:
        for j in range(n):
            row = 0.0
            for i in range(k):
                a = values[j, i0[i]] - values[j, i1[i]]
                b = values[j, i1[i]] - values[j, i2[i]]
                row = row + a * b
            acc = acc + row
    return acc / (<double>n * <double>k)


def nw_grid_smooth(const double[:, ::1] img, const double[:, ::1] eval_pts,
                   double c, double s, double h1, double h2):
    """Rotated product-Epanechnikov NW estimate from a regular-grid image.

    ``img[p-1, q-1]`` is the observation at ``(p/n, q/n)``.  Points with an
    empty kernel support get 0.
    """
    cdef Py_ssize_t n = img.shape[0]
    cdef Py_ssize_t ne = eval_pts.shape[0]
    cdef double[::1] out = np.zeros(ne)
    cdef double w1 = h1 * fabs(c) + h2 * fabs(s)
    cdef double w2 = h1 * fabs(s) + h2 * fabs(c)
    cdef double dn = <double>n
    cdef Py_ssize_t e, p, q, plo, phi, qlo, qhi
    cdef double t1, t2, d1, d2, z1, z2, w, num, den
    with nogil:
        for e in range(ne):
            t1 = eval_pts[e, 0]
            t2 = eval_pts[e, 1]
            plo = <Py_ssize_t>floor((t1 - w1) * dn)
            phi = <Py_ssize_t>ceil((t1 + w1) * dn)
            qlo = <Py_ssize_t>floor((t2 - w2) * dn)
            qhi = <Py_ssize_t>ceil((t2 + w2) * dn)
            if plo < 1:
                plo = 1
            if qlo < 1:
                qlo = 1
            if phi > n:
                phi = n
            if qhi > n:
                qhi = n
            num = 0.0
            den = 0.0
            for p in range(plo, phi + 1):
                d1 = p / dn - t1
                for q in range(qlo, qhi + 1):
                    d2 = q / dn - t2
                    z1 = (c * d1 + s * d2) / h1
                    z2 = (-s * d1 + c * d2) / h2
                    if fabs(z1) <= 1.0 and fabs(z2) <= 1.0:
                        w = (1.0 - z1 * z1) * (1.0 - z2 * z2)
                        num = num + w * img[p - 1, q - 1]
                        den = den + w
            if den > 0.0:
                out[e] = num / den
    return np.asarray(out)
