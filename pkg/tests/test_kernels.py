import math
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import blockl0
from blockl0._kernels import _pykernel
from oracles import fitted_norm_lstsq

try:
    from blockl0._kernels import _ckernel
except ImportError:  # pragma: no cover
    _ckernel = None

needs_c = pytest.mark.skipif(_ckernel is None, reason="compiled kernel not built")


def _problem(seed, n=25, p=7):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    y = X[:, :2] @ [1.5, -1.0] + rng.standard_normal(n)
    return X, y, np.ascontiguousarray(X.T @ X), np.ascontiguousarray(X.T @ y)


def test_backend_reported():
    assert blockl0.BACKEND in ("cython", "python")
    if _ckernel is not None:
        assert blockl0.BACKEND == "cython"


@given(st.integers(0, 10_000))
def test_python_fitted_norm_matches_lstsq(seed):
    X, y, G, b = _problem(seed)
    rng = np.random.default_rng(seed + 1)
    idx = np.sort(rng.choice(7, size=rng.integers(1, 7), replace=False))
    got = _pykernel.fitted_norm(G, b, idx)
    assert got == pytest.approx(fitted_norm_lstsq(X, y, idx.tolist()), rel=1e-9)


def test_collinear_gives_nan():
    X, y, G, b = _problem(0)
    X[:, 3] = 2 * X[:, 1]
    G = np.ascontiguousarray(X.T @ X)
    b = np.ascontiguousarray(X.T @ y)
    assert math.isnan(_pykernel.fitted_norm(G, b, np.array([1, 3])))
    assert not math.isnan(_pykernel.fitted_norm(G, b, np.array([1, 3]), ridge=0.1))
    if _ckernel is not None:
        assert math.isnan(_ckernel.fitted_norm(G, b, np.array([1, 3])))


@needs_c
@given(st.integers(0, 10_000))
@settings(max_examples=50)
def test_backends_agree_on_fitted_norms(seed):
    X, y, G, b = _problem(seed)
    masks = np.arange(2**7, dtype=np.uint64)
    for ridge in (0.0, 1.0 / 25):
        a = _pykernel.fitted_norms(G, b, masks, ridge)
        c = _ckernel.fitted_norms(G, b, masks, ridge)
        np.testing.assert_allclose(c, a, rtol=1e-11, atol=1e-11)


@needs_c
@pytest.mark.parametrize("seed", range(5))
def test_backends_walk_same_chain(seed):
    X, y, G, b = _problem(seed, n=40, p=12)
    blocks = np.repeat([0, 1], 6).astype(np.int64)
    kap = np.array([1.2, 2.5])
    spen = np.zeros(13)
    u = np.random.default_rng(seed).random((3000, 4))
    init = np.zeros(12, dtype=np.uint8)
    args = (G, b, blocks, kap, spen, init, u, 0.5, 0.0, 12)
    ra = _pykernel.mcmc_chain(*args)
    rc = _ckernel.mcmc_chain(*args)
    np.testing.assert_array_equal(np.asarray(ra[0]), np.asarray(rc[0]))
    np.testing.assert_array_equal(np.asarray(ra[1]), np.asarray(rc[1]))
    np.testing.assert_array_equal(np.asarray(ra[3]), np.asarray(rc[3]))
    np.testing.assert_allclose(np.asarray(rc[2]), np.asarray(ra[2]), rtol=1e-10, equal_nan=True)
    assert rc[4] == pytest.approx(ra[4])


def test_chain_respects_size_cap():
    X, y, G, b = _problem(3, n=40, p=8)
    blocks = np.zeros(8, dtype=np.int64)
    u = np.random.default_rng(0).random((2000, 4))
    add, dele, fit, acc, _ = _pykernel.mcmc_chain(
        G, b, blocks, np.array([0.0]), np.zeros(9), np.zeros(8, dtype=np.uint8),
        u, 0.5, 0.0, 2)
    size = 0
    for t in range(2000):
        if acc[t]:
            size += int(add[t] >= 0) - int(dele[t] >= 0)
        assert size <= 2


def test_pure_python_env_switch():
    code = "import blockl0; print(blockl0.BACKEND)"
    env = dict(os.environ, BLOCKL0_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                         text=True, check=True)
    assert out.stdout.strip() == "python"
