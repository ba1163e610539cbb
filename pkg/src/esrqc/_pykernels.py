"""Numpy implementations of the evolution kernels."""
import numpy as np


def rotate_pairs(amps, idx0, idx1, m00, m01, m10, m11):
    """Apply a 2x2 matrix in place to every column pair (idx0[p], idx1[p]).

    ``amps`` is a C-contiguous complex128 array of shape (rows, dim).
    """
    a0 = amps[:, idx0]
    a1 = amps[:, idx1]
    amps[:, idx0] = m00 * a0 + m01 * a1
    amps[:, idx1] = m10 * a0 + m11 * a1


def pair_overlap(amps, row_weights, idx0, idx1):
    """Sum over rows r and pairs p of w_r * conj(a[r, idx0[p]]) * a[r, idx1[p]]."""
    per_row = np.einsum("rp,rp->r", amps[:, idx0].conj(), amps[:, idx1])
    return complex(np.dot(row_weights, per_row))
