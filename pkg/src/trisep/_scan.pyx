# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled lane for the grid kernels; see _scan_py for the contract."""
import numpy as np

cimport cython
from libc.math cimport acos, cos, fabs, sqrt

ctypedef double complex cplx

cdef extern from "complex.h" nogil:
    double cabs(cplx)
    cplx conj(cplx)
    double creal(cplx)


cdef inline double _min_eig2(cplx g00, cplx g01, cplx g11) nogil:
    cdef double a = creal(g00)
    cdef double d = creal(g11)
    cdef double off = cabs(g01)
    cdef double h = 0.5 * (a + d)
    return h - sqrt(0.25 * (a - d) * (a - d) + off * off)


cdef inline double _min_eig3(cplx g00, cplx g01, cplx g02,
                             cplx g11, cplx g12, cplx g22) nogil:
    # trigonometric eigenvalue formula for a Hermitian 3x3 matrix
    cdef double q = (creal(g00) + creal(g11) + creal(g22)) / 3.0
    cdef double p1 = cabs(g01) ** 2 + cabs(g02) ** 2 + cabs(g12) ** 2
    cdef double a0 = creal(g00) - q
    cdef double a1 = creal(g11) - q
    cdef double a2 = creal(g22) - q
    cdef double p2 = a0 * a0 + a1 * a1 + a2 * a2 + 2.0 * p1
    cdef double p = sqrt(p2 / 6.0)
    if p < 1e-300:
        return q
    # det of (G - qI) / p
    cdef cplx b01 = g01 / p, b02 = g02 / p, b12 = g12 / p
    cdef double b00 = a0 / p, b11 = a1 / p, b22 = a2 / p
    cdef double detb = (b00 * (b11 * b22 - creal(b12 * conj(b12)))
                        - creal(b01 * conj(b01)) * b22
                        - creal(b02 * conj(b02)) * b11
                        + 2.0 * creal(b01 * b12 * conj(b02)))
    cdef double r = detb / 2.0
    if r < -1.0:
        r = -1.0
    elif r > 1.0:
        r = 1.0
    cdef double phi = acos(r) / 3.0
    return q + 2.0 * p * cos(phi + 2.0943951023931953)  # + 2*pi/3


def min_gram_grid(cplx[:, :, :, :, ::1] T, unsigned char[:, ::1] conj_flags,
                  cplx[::1] alphas, cplx[::1] betas,
                  double[:, ::1] out, bint normalize):
    cdef Py_ssize_t nf = T.shape[0]
    cdef Py_ssize_t n = T.shape[3]
    cdef Py_ssize_t na = alphas.shape[0]
    cdef Py_ssize_t nb = betas.shape[0]
    if n != 2 and n != 3:
        raise ValueError("compiled lane supports Gram dimension 2 or 3")
    cdef Py_ssize_t ia, ib, f, p, q, a, b
    cdef cplx x, y, cp, cq, w
    cdef cplx c[4]
    cdef cplx g[3][3]
    cdef double val, sa, sb
    with nogil:
        for ia in range(na):
            for ib in range(nb):
                for a in range(n):
                    for b in range(n):
                        g[a][b] = 0
                for f in range(nf):
                    x = conj(alphas[ia]) if conj_flags[f, 0] else alphas[ia]
                    y = conj(betas[ib]) if conj_flags[f, 1] else betas[ib]
                    c[0] = x * y
                    c[1] = x
                    c[2] = y
                    c[3] = 1
                    for p in range(4):
                        cp = conj(c[p])
                        for q in range(4):
                            w = cp * c[q]
                            for a in range(n):
                                for b in range(n):
                                    g[a][b] = g[a][b] + w * T[f, p, q, a, b]
                if n == 2:
                    val = _min_eig2(g[0][0], g[0][1], g[1][1])
                else:
                    val = _min_eig3(g[0][0], g[0][1], g[0][2],
                                    g[1][1], g[1][2], g[2][2])
                if normalize:
                    sa = 1.0 + cabs(alphas[ia]) ** 2
                    sb = 1.0 + cabs(betas[ib]) ** 2
                    val = val / (sa * sb)
                out[ia, ib] = val
