# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: Grover iterations and batched fixed-step descent."""
from libc.math cimport sin, M_PI
from libc.stdlib cimport malloc, free
import numpy as np
cimport numpy as cnp

cnp.import_array()

DEF QUADRATIC = 0
DEF DOUBLEWELL = 1
DEF EGGCRATE = 2


cdef inline void _round(double* z, const double* s, Py_ssize_t n, double mr, double mi,
                        double* sr, double* si) noexcept nogil:
    """One flip + reflection with a' = m - s*a; returns the next signed sum."""
    cdef Py_ssize_t i, n4 = n - n % 4
    cdef double r0 = 0.0, r1 = 0.0, r2 = 0.0, r3 = 0.0
    cdef double i0 = 0.0, i1 = 0.0, i2 = 0.0, i3 = 0.0
    cdef double a, b
    # four accumulators break the add-latency chain
    for i in range(0, n4, 4):
        a = mr - s[i] * z[2 * i]
        b = mi - s[i] * z[2 * i + 1]
        z[2 * i] = a
        z[2 * i + 1] = b
        r0 += s[i] * a
        i0 += s[i] * b
        a = mr - s[i + 1] * z[2 * i + 2]
        b = mi - s[i + 1] * z[2 * i + 3]
        z[2 * i + 2] = a
        z[2 * i + 3] = b
        r1 += s[i + 1] * a
        i1 += s[i + 1] * b
        a = mr - s[i + 2] * z[2 * i + 4]
        b = mi - s[i + 2] * z[2 * i + 5]
        z[2 * i + 4] = a
        z[2 * i + 5] = b
        r2 += s[i + 2] * a
        i2 += s[i + 2] * b
        a = mr - s[i + 3] * z[2 * i + 6]
        b = mi - s[i + 3] * z[2 * i + 7]
        z[2 * i + 6] = a
        z[2 * i + 7] = b
        r3 += s[i + 3] * a
        i3 += s[i + 3] * b
    for i in range(n4, n):
        a = mr - s[i] * z[2 * i]
        b = mi - s[i] * z[2 * i + 1]
        z[2 * i] = a
        z[2 * i + 1] = b
        r0 += s[i] * a
        i0 += s[i] * b
    sr[0] = (r0 + r1) + (r2 + r3)
    si[0] = (i0 + i1) + (i2 + i3)


def grover_iterate(double complex[::1] amps, const unsigned char[::1] flip, long n_iter):
    """Apply ``n_iter`` rounds of phase flip + inversion about the mean, in place."""
    cdef Py_ssize_t i, n = amps.shape[0]
    cdef long it
    cdef double sr = 0.0, si = 0.0
    cdef double* z
    cdef double* s
    if n == 0 or n_iter <= 0:
        return
    z = <double*> &amps[0]
    s = <double*> malloc(n * sizeof(double))
    if s == NULL:
        raise MemoryError()
    with nogil:
        for i in range(n):
            s[i] = -1.0 if flip[i] else 1.0
            sr += s[i] * z[2 * i]
            si += s[i] * z[2 * i + 1]
        for it in range(n_iter):
            _round(z, s, n, 2.0 * sr / n, 2.0 * si / n, &sr, &si)
    free(s)


cdef inline double _clamp(double v, double lo, double hi) noexcept nogil:
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


cdef void _separable(int kind, double tilt, double* Y, const double* E, bint with_errors,
                     Py_ssize_t M, Py_ssize_t p, double h, long L,
                     const double* lo, const double* hi) noexcept nogil:
    """Quadratic and double-well gradients act coordinate by coordinate.

    Steps run outermost so consecutive coordinates are independent work.
    """
    cdef Py_ssize_t j, d, n = M * p
    cdef long k
    cdef double x, g
    for k in range(L):
        for j in range(n):
            d = j % p
            x = Y[j]
            if kind == QUADRATIC:
                g = 2.0 * x
            else:
                g = 4.0 * x * (x * x - 1.0) + tilt
            if with_errors:
                g = g + E[((j // p) * L + k) * p + d]
            Y[j] = _clamp(x - h * g, lo[d], hi[d])


cdef void _eggcrate(const double* prm, double* Y, const double* E, bint with_errors,
                    Py_ssize_t M, Py_ssize_t p, double h, long L,
                    const double* lo, const double* hi, double* u) noexcept nogil:
    # prm = [gap, graded, radius, offsets(p), du_dx(p), strides(p)]
    cdef Py_ssize_t m, d
    cdef long k
    cdef double gap = prm[0], R2 = prm[2] * prm[2], t2, w, coef, g
    cdef bint graded = prm[1] != 0.0
    cdef const double* off = prm + 3
    cdef const double* du = prm + 3 + p
    cdef const double* stride = prm + 3 + 2 * p
    cdef double* x
    for m in range(M):
        x = Y + m * p
        for k in range(L):
            t2 = 0.0
            for d in range(p):
                u[d] = off[d] + (x[d] - lo[d]) * du[d]
                t2 = t2 + (u[d] - 0.5) * (u[d] - 0.5)
            t2 = t2 / R2
            w = 1.0 - t2 if t2 < 1.0 else 0.0
            coef = 4.0 * gap / R2 * w
            for d in range(p):
                if graded:
                    g = (-M_PI * sin(2.0 * M_PI * u[d]) + gap * stride[d]) * du[d]
                else:
                    g = (-M_PI * sin(2.0 * M_PI * u[d]) + coef * (u[d] - 0.5)) * du[d]
                if with_errors:
                    g = g + E[(m * L + k) * p + d]
                x[d] = _clamp(x[d] - h * g, lo[d], hi[d])


def descend_gd(int kind, const double[::1] prm, const double[:, ::1] X,
               const double[:, :, ::1] E, double h, long L,
               const double[::1] lo, const double[::1] hi):
    """Terminal points of L clamped gradient steps from every row of X.

    ``E`` holds per-step gradient errors with shape (M, L, p), or has zero
    rows to run the error-free descent.
    """
    cdef Py_ssize_t M = X.shape[0], p = X.shape[1]
    cdef bint with_errors = E.shape[0] > 0
    out = np.array(X, dtype=np.float64, order="C", copy=True)
    if M == 0 or L <= 0:
        return out
    cdef double[:, ::1] Y = out
    cdef const double* Ep = &E[0, 0, 0] if with_errors else NULL
    cdef double* u
    if kind == QUADRATIC or kind == DOUBLEWELL:
        with nogil:
            _separable(kind, prm[0], &Y[0, 0], Ep, with_errors, M, p, h, L, &lo[0], &hi[0])
        return out
    u = <double*> malloc(p * sizeof(double))
    if u == NULL:
        raise MemoryError()
    try:
        with nogil:
            _eggcrate(&prm[0], &Y[0, 0], Ep, with_errors, M, p, h, L, &lo[0], &hi[0], u)
    finally:
        free(u)
    return out
