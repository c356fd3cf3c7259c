import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from clusterlab import kernels
from clusterlab import _kernels_py as py

compiled = pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled kernels not built")

values = hnp.arrays(np.float64, st.integers(0, 60), elements=st.floats(0, 5, allow_nan=False))


def test_backend_is_known():
    assert kernels.BACKEND in ("cython", "python")


@compiled
@settings(max_examples=200, deadline=None)
@given(values, st.integers(1, 7), st.floats(0.1, 4))
def test_block_stats_backends_agree(x, r, u):
    a = kernels.block_stats(x, r, u)
    b = py.block_stats(x[: (x.shape[0] // r) * r], r, u)
    for p, q in zip(a[:3], b[:3]):
        np.testing.assert_array_equal(p, q)
    np.testing.assert_allclose(a[3], b[3], rtol=1e-12, atol=1e-12)


@compiled
@settings(max_examples=100, deadline=None)
@given(values, st.integers(1, 7))
def test_block_maxima_backends_agree(x, r):
    x = x[: (x.shape[0] // r) * r]
    np.testing.assert_array_equal(kernels.block_maxima(x, r), py.block_maxima(x, r))


@compiled
@settings(max_examples=100, deadline=None)
@given(values, st.floats(0, 0.99), st.floats(0, 10))
def test_ar1_filter_backends_agree(z, phi, x0):
    np.testing.assert_allclose(kernels.ar1_filter(z, phi, x0), py.ar1_filter(z, phi, x0), rtol=1e-12, atol=1e-12)


@compiled
@settings(max_examples=100, deadline=None)
@given(values, hnp.arrays(np.float64, st.integers(1, 4), elements=st.floats(0, 2)))
def test_moving_max_backends_agree(z, a):
    if z.shape[0] < a.shape[0]:
        z = np.concatenate([z, np.ones(a.shape[0])])
    np.testing.assert_array_equal(kernels.moving_max(z, a), py.moving_max(z, a))


def test_block_stats_by_hand():
    x = np.array([0.5, 2.0, 0.3, 1.5, 0.1, 0.2])
    count, first, last, csum = kernels.block_stats(x, 3, 1.0)
    np.testing.assert_array_equal(count, [1, 1])
    np.testing.assert_array_equal(first, [2, 1])
    np.testing.assert_array_equal(last, [2, 1])
    np.testing.assert_allclose(csum, [2.0, 1.5])


def test_threshold_is_strict():
    count, *_ = kernels.block_stats(np.array([1.0, 1.0, 1.0]), 3, 1.0)
    assert count[0] == 0


def test_ar1_filter_recursion():
    z = np.array([1.0, 2.0, 3.0])
    np.testing.assert_allclose(kernels.ar1_filter(z, 0.5, 4.0), [3.0, 3.5, 4.75])


def test_moving_max_by_hand():
    z = np.array([1.0, 5.0, 2.0, 3.0])
    # out[t] = max(a0 z[t+1], a1 z[t])
    np.testing.assert_allclose(kernels.moving_max(z, np.array([1.0, 0.5])), [5.0, 2.5, 3.0])


def test_pure_python_switch():
    import os
    import subprocess
    import sys

    env = dict(os.environ, CLUSTERLAB_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from clusterlab import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
