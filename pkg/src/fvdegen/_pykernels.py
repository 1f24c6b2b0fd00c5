"""Numpy implementation of the hot loops; fallback for :mod:`fvdegen._ckernels`.

Same signatures and the same floating point operation order as the
compiled module.
"""

import numpy as np

from .flux import half_slope


def muscl_traces(ue, um, up):
    s = half_slope(ue[:, :-2], ue[:, 1:-1], ue[:, 2:])
    um[...] = ue[:, 1:-2] + s[:, :-1]
    up[...] = ue[:, 2:-1] - s[:, 1:]


def fu_linear(ue, he, dV, dist, second_order, F, A, um, up):
    A[...] = -dV - (he[:, 1:] - he[:, :-1]) / dist
    if second_order:
        muscl_traces(ue, um, up)
    else:
        um[...] = ue[:, 1:-2]
        up[...] = ue[:, 2:-1]
    F[...] = np.maximum(A, 0.0) * um - np.maximum(-A, 0.0) * up


def divergence(F, width, out):
    out += -(F[:, 1:] - F[:, :-1]) / width
