import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mlqueue import _kernels_py, kernels

compiled = pytest.importorskip("mlqueue._ckernels")


def loop_lindley(a, s):
    d, out = 0.0, []
    for ak, sk in zip(a, s):
        d = max(d, ak) + sk
        out.append(d)
    return np.array(out)


def loop_abs_walk(steps, start):
    q, out = start, []
    for s in steps:
        q = abs(q + s)
        out.append(q)
    return np.array(out, dtype=np.int64)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), max_size=200), st.floats(-10, 10))
def test_regulator_backends_agree(x, init):
    x = np.array(x, dtype=float)
    a = compiled.regulator_values(x, init)
    b = _kernels_py.regulator_values(x, init)
    assert np.array_equal(a, b)
    ref = np.array([max(0.0, -min([init] + list(x[: i + 1]))) for i in range(x.size)])
    assert np.array_equal(b, ref)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from([-1, 1]), max_size=300), st.integers(0, 5))
def test_abs_walk_backends_agree(steps, start):
    s = np.array(steps, dtype=np.int64)
    ref = loop_abs_walk(steps, start)
    assert np.array_equal(_kernels_py.abs_walk(s, start), ref)
    assert np.array_equal(compiled.abs_walk(s, start), ref)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 5), st.floats(0, 5)), max_size=200))
def test_lindley_backends_agree(pairs):
    gaps = np.array([p[0] for p in pairs])
    s = np.array([p[1] for p in pairs])
    a = np.cumsum(gaps)
    ref = loop_lindley(a, s)
    assert np.array_equal(compiled.lindley_departures(a, s), _kernels_py.lindley_departures(a, s))
    assert np.allclose(_kernels_py.lindley_departures(a, s), ref, rtol=1e-12, atol=1e-12)


def test_spectral_sum_backends_agree():
    x = np.array([0.5, 3.0, 40.0])
    for a, b, g in ((0.5, 1.0, 1.0), (0.8, 2.6, 3.0)):
        s1, m1 = compiled.spectral_sum(x, -20.0, 0.01, 4000, a, b, g)
        s2, m2 = _kernels_py.spectral_sum(x, -20.0, 0.01, 4000, a, b, g)
        assert np.allclose(s1, s2, rtol=1e-12, atol=1e-15) and np.allclose(m1, m2, rtol=1e-12)


def test_backend_selection_follows_environment():
    code = "from mlqueue import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, MLQUEUE_PURE="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    env.pop("MLQUEUE_PURE")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "cython" == kernels.BACKEND
