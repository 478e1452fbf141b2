# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled voting kernels.

Arithmetic mirrors ``_reference.py`` expression-for-expression so that the
two backends produce bit-identical accumulators on the same inputs.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport floor, sqrt

cnp.import_array()

BACKEND = "cython"


def vote_plane(double[:, ::1] points, double[::1] cos_t, double[::1] sin_t,
               double[::1] cos_p, double[::1] sin_p,
               double rho_lo, double rho_width, Py_ssize_t rho_bins):
    cdef Py_ssize_t n = points.shape[0]
    cdef Py_ssize_t nt = cos_t.shape[0]
    cdef Py_ssize_t np_ = cos_p.shape[0]
    counts_arr = np.zeros((nt, np_, rho_bins), dtype=np.int64)
    cdef long long[:, :, ::1] counts = counts_arr
    cdef Py_ssize_t i, t, p
    cdef double x, y, z, nx, ny, nz, rho, k
    for i in range(n):
        x = points[i, 0]
        y = points[i, 1]
        z = points[i, 2]
        for t in range(nt):
            for p in range(np_):
                nx = cos_t[t] * sin_p[p]
                ny = sin_t[t] * sin_p[p]
                nz = cos_p[p]
                rho = x * nx + y * ny + z * nz
                k = floor((rho - rho_lo) / rho_width)
                if 0 <= k < rho_bins:
                    counts[t, p, <Py_ssize_t>k] += 1
    return counts_arr


def vote_circle(double[:, ::1] points2, double[::1] cx, double[::1] cy,
                double r_lo, double r_width, Py_ssize_t r_bins):
    cdef Py_ssize_t n = points2.shape[0]
    cdef Py_ssize_t ncx = cx.shape[0]
    cdef Py_ssize_t ncy = cy.shape[0]
    counts_arr = np.zeros((ncx, ncy, r_bins), dtype=np.int64)
    cdef long long[:, :, ::1] counts = counts_arr
    cdef Py_ssize_t i, a, b
    cdef double x, y, dx, dy, r, k
    for i in range(n):
        x = points2[i, 0]
        y = points2[i, 1]
        for a in range(ncx):
            dx = x - cx[a]
            for b in range(ncy):
                dy = y - cy[b]
                r = sqrt(dx * dx + dy * dy)
                k = floor((r - r_lo) / r_width)
                if 0 <= k < r_bins:
                    counts[a, b, <Py_ssize_t>k] += 1
    return counts_arr


def vote_torus(double[::1] radial, double[::1] z,
               double rmin_lo, double rmin_width, Py_ssize_t rmin_bins,
               double[::1] rmax_centers):
    cdef Py_ssize_t n = radial.shape[0]
    cdef Py_ssize_t nmax = rmax_centers.shape[0]
    counts_arr = np.zeros((rmin_bins, nmax), dtype=np.int64)
    cdef long long[:, ::1] counts = counts_arr
    cdef Py_ssize_t i, j
    cdef double d, rmin, k
    for j in range(nmax):
        for i in range(n):
            d = radial[i] - rmax_centers[j]
            rmin = sqrt(d * d + z[i] * z[i])
            k = floor((rmin - rmin_lo) / rmin_width)
            if 0 <= k < rmin_bins:
                counts[<Py_ssize_t>k, j] += 1
    return counts_arr


def vote_planes_box(double[:, ::1] normals, double[::1] offsets,
                    double[::1] lows, double[::1] widths, long long[::1] bins):
    cdef Py_ssize_t m = normals.shape[0]
    cdef Py_ssize_t bx = <Py_ssize_t>bins[0]
    cdef Py_ssize_t by = <Py_ssize_t>bins[1]
    cdef Py_ssize_t bz = <Py_ssize_t>bins[2]
    counts_arr = np.zeros((bx, by, bz), dtype=np.int64)
    cdef long long[:, :, ::1] counts = counts_arr
    cdef Py_ssize_t q, dom, a, b, i, j
    cdef Py_ssize_t idx[3]
    cdef Py_ssize_t nb[3]
    cdef double n0, n1, n2, rho, na, nb_, nd, av, bv, solved, k
    cdef double absn0, absn1, absn2
    nb[0] = bx
    nb[1] = by
    nb[2] = bz
    for q in range(m):
        n0 = normals[q, 0]
        n1 = normals[q, 1]
        n2 = normals[q, 2]
        rho = offsets[q]
        absn0 = -n0 if n0 < 0 else n0
        absn1 = -n1 if n1 < 0 else n1
        absn2 = -n2 if n2 < 0 else n2
        dom = 0
        if absn1 > absn0:
            dom = 1
        if absn2 > (absn1 if dom == 1 else absn0):
            dom = 2
        a = 1 if dom == 0 else 0
        b = 2 if dom != 2 else 1
        na = normals[q, a]
        nb_ = normals[q, b]
        nd = normals[q, dom]
        for i in range(nb[a]):
            av = lows[a] + (i + 0.5) * widths[a]
            for j in range(nb[b]):
                bv = lows[b] + (j + 0.5) * widths[b]
                solved = (rho - na * av - nb_ * bv) / nd
                k = floor((solved - lows[dom]) / widths[dom])
                if 0 <= k < nb[dom]:
                    idx[a] = i
                    idx[b] = j
                    idx[dom] = <Py_ssize_t>k
                    counts[idx[0], idx[1], idx[2]] += 1
    return counts_arr
