"""The compiled and numpy backends must agree bit for bit."""

import os

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fvdegen import _pykernels as py
from fvdegen import kernels

ck = pytest.importorskip("fvdegen._ckernels", reason="compiled extension not built")


def _case(rng, rows, n, flat_fraction):
    ue = rng.uniform(0, 2, (rows, n + 4))
    ue[rng.uniform(size=ue.shape) < flat_fraction] = 0.0
    he = np.ascontiguousarray(np.log1p(ue[:, 1 : n + 3]))
    dV = rng.normal(size=(rows, n + 1))
    dist = rng.uniform(0.01, 0.1, n + 1)
    return ue, he, dV, dist


@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 40), st.sampled_from([0.0, 0.3]),
       st.booleans())
def test_fu_linear_backends_identical(seed, rows, n, flat, second_order):
    ue, he, dV, dist = _case(np.random.default_rng(seed), rows, n, flat)
    outs = []
    for mod in (py, ck):
        bufs = [np.empty((rows, n + 1)) for _ in range(4)]
        mod.fu_linear(ue, he, dV, dist, second_order, *bufs)
        outs.append(bufs)
    for a, b in zip(*outs):
        assert np.array_equal(a, b)


@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(1, 40))
def test_muscl_traces_backends_identical(seed, rows, n):
    ue, *_ = _case(np.random.default_rng(seed), rows, n, 0.2)
    res = []
    for mod in (py, ck):
        um, up = np.empty((rows, n + 1)), np.empty((rows, n + 1))
        mod.muscl_traces(ue, um, up)
        res.append((um, up))
    assert np.array_equal(res[0][0], res[1][0]) and np.array_equal(res[0][1], res[1][1])


def test_divergence_backends_identical():
    rng = np.random.default_rng(3)
    F = rng.normal(size=(3, 21))
    w = rng.uniform(0.1, 1, 20)
    a, b = np.zeros((3, 20)), np.zeros((3, 20))
    py.divergence(F, w, a)
    ck.divergence(F, w, b)
    assert np.array_equal(a, b)
    np.testing.assert_allclose(a[:, 0], -(F[:, 1] - F[:, 0]) / w[0])


def test_backend_selection():
    expected = "python" if os.environ.get("FVDEGEN_PURE_PYTHON") else "cython"
    assert kernels.BACKEND == expected
