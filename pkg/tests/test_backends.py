import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diffusls import _kernels

needs_numba = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not installed")


def _random_system(rng, nx, nu):
    A = rng.normal(size=(nx, nx)) - 3 * np.eye(nx)
    return A, rng.normal(size=(nx, nu)), rng.normal(size=nx)


@needs_numba
@settings(max_examples=20)
@given(st.integers(1, 5), st.integers(1, 3), st.integers(1, 200), st.integers(0, 2 ** 32 - 1))
def test_rk4_backends_agree(nx, nu, steps, seed):
    rng = np.random.default_rng(seed)
    A, B, x0 = _random_system(rng, nx, nu)
    u = rng.normal(size=(steps, 3, nu))
    a = _kernels._rk4_lti_numba(A, B, x0, u, 0.01)
    b = _kernels._rk4_lti_numpy(A, B, x0, u, 0.01)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


@needs_numba
@settings(max_examples=20)
@given(st.integers(1, 4), st.integers(1, 80), st.sampled_from([8, 64, 256]), st.integers(0, 2 ** 32 - 1))
def test_cosine_backends_agree(rows, modes, n, seed):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=(rows, modes)) / (1 + np.arange(modes)) ** 2
    th = -np.pi + 2 * np.pi * np.arange(n) / n
    a = _kernels._cosine_synthesis_numba(c, th)
    b = _kernels._cosine_synthesis_numpy(c, th)
    assert np.max(np.abs(a - b)) <= 1e-12 * max(1.0, np.sum(np.abs(c)))


def test_rk4_scalar_matches_stability_function():
    h, lam = 0.1, -2.0
    X = _kernels.rk4_lti(np.array([[lam]]), np.array([[1.0]]), np.array([1.0]), np.zeros((10, 3, 1)), h)
    z = h * lam
    R = 1 + z + z ** 2 / 2 + z ** 3 / 6 + z ** 4 / 24
    assert np.allclose(X[:, 0], R ** np.arange(11), rtol=1e-14)


def test_rk4_exact_for_cubic_forcing():
    # x' = 3 t^2 integrates exactly (RK4 is exact for polynomial right-hand sides of degree <= 3)
    h, n = 0.25, 8
    t0 = np.arange(n) * h
    stage = np.stack([3 * t0 ** 2, 3 * (t0 + h / 2) ** 2, 3 * (t0 + h) ** 2], axis=1)[:, :, None]
    X = _kernels.rk4_lti(np.zeros((1, 1)), np.ones((1, 1)), np.zeros(1), stage, h)
    assert np.allclose(X[:, 0], (np.arange(n + 1) * h) ** 3, rtol=1e-14, atol=1e-15)


def test_threaded_synthesis_is_safe():
    from concurrent.futures import ThreadPoolExecutor

    th = np.linspace(-np.pi, np.pi, 128, endpoint=False)
    c = np.ones((2, 16))
    ref = _kernels.cosine_synthesis(c, th)
    with ThreadPoolExecutor(4) as ex:
        outs = list(ex.map(lambda _: _kernels.cosine_synthesis(c, th), range(16)))
    assert all(np.array_equal(o, ref) for o in outs)


@pytest.mark.parametrize("flag,expected", [("1", "numpy"), ("0", "numba" if _kernels.HAVE_NUMBA else "numpy")])
def test_env_flag_selects_backend(flag, expected):
    env = dict(os.environ, DIFFUSLS_DISABLE_NUMBA=flag)
    r = subprocess.run([sys.executable, "-c", "import diffusls; print(diffusls.BACKEND)"],
                       capture_output=True, text=True, env=env, check=True)
    assert r.stdout.strip() == expected
