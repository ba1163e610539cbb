# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled evolution kernels; same contracts as ``_pykernels``."""
cimport cython


def rotate_pairs(double complex[:, ::1] amps, const long long[::1] idx0,
                 const long long[::1] idx1, double complex m00, double complex m01,
                 double complex m10, double complex m11):
    cdef Py_ssize_t rows = amps.shape[0]
    cdef Py_ssize_t npairs = idx0.shape[0]
    cdef Py_ssize_t r, p
    cdef long long i0, i1
    cdef double complex a0, a1
    with nogil:
        for r in range(rows):
            for p in range(npairs):
                i0 = idx0[p]
                i1 = idx1[p]
                a0 = amps[r, i0]
                a1 = amps[r, i1]
                if a0 == 0 and a1 == 0:
                    continue
                amps[r, i0] = m00 * a0 + m01 * a1
                amps[r, i1] = m10 * a0 + m11 * a1


def pair_overlap(const double complex[:, ::1] amps, const double[::1] row_weights,
                 const long long[::1] idx0, const long long[::1] idx1):
    cdef Py_ssize_t rows = amps.shape[0]
    cdef Py_ssize_t npairs = idx0.shape[0]
    cdef Py_ssize_t r, p
    cdef double complex acc = 0, row_acc
    cdef double complex a0
    with nogil:
        for r in range(rows):
            if row_weights[r] == 0:
                continue
            row_acc = 0
            for p in range(npairs):
                a0 = amps[r, idx0[p]]
                row_acc = row_acc + a0.conjugate() * amps[r, idx1[p]]
            acc = acc + row_weights[r] * row_acc
    return complex(acc)
