"""Batched inverse/log-determinant with closed forms for 1x1 and 2x2 blocks.

``np.linalg`` spends most of its time on per-call overhead for stacks of
tiny matrices; the samplers call these once per time step.
"""

import numpy as np


def inv(mat):
    dim = mat.shape[-1]
    if dim == 1:
        return 1.0 / mat
    if dim == 2:
        a, b = mat[..., 0, 0], mat[..., 0, 1]
        c, d = mat[..., 1, 0], mat[..., 1, 1]
        det = a * d - b * c
        out = np.empty_like(mat)
        out[..., 0, 0] = d / det
        out[..., 0, 1] = -b / det
        out[..., 1, 0] = -c / det
        out[..., 1, 1] = a / det
        return out
    return np.linalg.inv(mat)


def det(mat):
    dim = mat.shape[-1]
    if dim == 1:
        return mat[..., 0, 0]
    if dim == 2:
        return mat[..., 0, 0] * mat[..., 1, 1] - mat[..., 0, 1] * mat[..., 1, 0]
    return np.linalg.det(mat)


def logdet(mat):
    """Log-determinant of (assumed) SPD matrices; ``-inf`` where not positive."""
    if mat.shape[-1] <= 2:
        d = det(mat)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(d > 0, np.log(np.where(d > 0, d, 1.0)), -np.inf)
    sign, value = np.linalg.slogdet(mat)
    return np.where(sign > 0, value, -np.inf)


def matvec(mat, vec):
    return np.einsum("...ij,...j->...i", mat, vec)


def quad(vec, mat):
    """``vec' mat vec`` over the batch."""
    return np.einsum("...i,...ij,...j->...", vec, mat, vec)
