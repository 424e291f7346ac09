"""Backend equivalence: the compiled, vectorized, and reference loop
implementations of each kernel must agree."""

import os
import subprocess
import sys

import numpy as np
import pytest

import recbench.kernels as kernels
from recbench.kernels import (
    _bpr_epoch_loops,
    _bpr_epoch_numpy,
    _k_core_mask_loops,
    _k_core_mask_numpy,
    _kg_core_mask_loops,
    _kg_core_mask_numpy,
    bpr_epoch,
    k_core_mask,
    kg_core_mask,
)

HAS_NUMBA = kernels.NUMBA_ENABLED


def bpr_inputs(rng, n=200, n_users=20, n_items=30, d=8):
    users = rng.integers(1, n_users, n)
    pos = rng.integers(1, n_items, n)
    neg = rng.integers(1, n_items, n)
    neg[neg == pos] = 1 + (pos[neg == pos] % (n_items - 1))
    user_f = rng.normal(size=(n_users, d))
    item_f = rng.normal(size=(n_items, d))
    return users, pos, neg, user_f, item_f


def test_bpr_epoch_numpy_matches_loops(rng):
    for _ in range(10):
        users, pos, neg, user_f, item_f = bpr_inputs(rng)
        uf_a, if_a = user_f.copy(), item_f.copy()
        uf_b, if_b = user_f.copy(), item_f.copy()
        loss_a = _bpr_epoch_loops(users, pos, neg, uf_a, if_a, 0.05, 1e-3)
        loss_b = _bpr_epoch_numpy(users, pos, neg, uf_b, if_b, 0.05, 1e-3)
        # accumulation order differs between the two forms, so agreement
        # is to the last few ulps rather than bitwise
        assert loss_b == pytest.approx(loss_a, rel=1e-12)
        np.testing.assert_allclose(uf_b, uf_a, rtol=1e-12, atol=1e-13)
        np.testing.assert_allclose(if_b, if_a, rtol=1e-12, atol=1e-13)


@pytest.mark.skipif(not HAS_NUMBA, reason="compiled backend unavailable")
def test_bpr_epoch_jit_matches_loops(rng):
    from recbench.kernels import _bpr_epoch_jit

    users, pos, neg, user_f, item_f = bpr_inputs(rng)
    uf_a, if_a = user_f.copy(), item_f.copy()
    uf_b, if_b = user_f.copy(), item_f.copy()
    loss_a = _bpr_epoch_loops(users, pos, neg, uf_a, if_a, 0.05, 1e-3)
    loss_b = _bpr_epoch_jit(users, pos, neg, uf_b, if_b, 0.05, 1e-3)
    assert loss_b == pytest.approx(loss_a, rel=1e-9)
    np.testing.assert_allclose(uf_b, uf_a, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(if_b, if_a, rtol=1e-9, atol=1e-12)


def core_inputs(rng, n=300, n_users=40, n_items=50):
    u = rng.integers(1, n_users, n).astype(np.int64)
    i = rng.integers(1, n_items, n).astype(np.int64)
    return u, i, n_users, n_items


def test_k_core_numpy_matches_loops(rng):
    for _ in range(20):
        u, i, n_users, n_items = core_inputs(rng)
        for k_user, k_item in ((1, 1), (3, 2), (5, 5), (0, 4)):
            a = _k_core_mask_loops(u, i, n_users, n_items, k_user, k_item)
            b = _k_core_mask_numpy(u, i, n_users, n_items, k_user, k_item)
            np.testing.assert_array_equal(a, b)


@pytest.mark.skipif(not HAS_NUMBA, reason="compiled backend unavailable")
def test_k_core_jit_matches_loops(rng):
    from recbench.kernels import _k_core_mask_jit

    for _ in range(10):
        u, i, n_users, n_items = core_inputs(rng)
        a = _k_core_mask_loops(u, i, n_users, n_items, 3, 3)
        b = _k_core_mask_jit(u, i, n_users, n_items, 3, 3)
        np.testing.assert_array_equal(a, b)


def test_kg_core_numpy_matches_loops(rng):
    for _ in range(20):
        n = 200
        h = rng.integers(1, 30, n).astype(np.int64)
        t = rng.integers(1, 30, n).astype(np.int64)
        r = rng.integers(1, 8, n).astype(np.int64)
        for k in (1, 2, 4):
            a = _kg_core_mask_loops(h, r, t, 30, 8, k)
            b = _kg_core_mask_numpy(h, r, t, 30, 8, k)
            np.testing.assert_array_equal(a, b)


@pytest.mark.skipif(not HAS_NUMBA, reason="compiled backend unavailable")
def test_kg_core_jit_matches_loops(rng):
    from recbench.kernels import _kg_core_mask_jit

    n = 200
    h = rng.integers(1, 30, n).astype(np.int64)
    t = rng.integers(1, 30, n).astype(np.int64)
    r = rng.integers(1, 8, n).astype(np.int64)
    a = _kg_core_mask_loops(h, r, t, 30, 8, 3)
    b = _kg_core_mask_jit(h, r, t, 30, 8, 3)
    np.testing.assert_array_equal(a, b)


def test_empty_inputs():
    empty = np.zeros(0, np.int64)
    assert k_core_mask(empty, empty, 5, 5, 2, 2).shape == (0,)
    assert kg_core_mask(empty, empty, empty, 5, 3, 2).shape == (0,)
    uf = np.zeros((2, 3))
    itf = np.zeros((2, 3))
    assert bpr_epoch(empty, empty, empty, uf, itf, 0.1, 0.0) == 0.0


def _run_with_backend(value):
    env = dict(os.environ, RECBENCH_BACKEND=value)
    return subprocess.run(
        [sys.executable, "-c",
         "import recbench.kernels as k; print(k.BACKEND)"],
        capture_output=True, text=True, env=env)


def test_backend_env_selection():
    out = _run_with_backend("numpy")
    assert out.returncode == 0
    assert out.stdout.strip() == "numpy"
    out = _run_with_backend("invalid")
    assert out.returncode != 0
    assert "RECBENCH_BACKEND" in out.stderr


@pytest.mark.skipif(not HAS_NUMBA, reason="compiled backend unavailable")
def test_backend_env_numba():
    out = _run_with_backend("numba")
    assert out.returncode == 0
    assert out.stdout.strip() == "numba"


def test_public_dispatch_matches_reference(rng):
    # whatever backend is active, the public functions must agree with
    # the reference loops
    users, pos, neg, user_f, item_f = bpr_inputs(rng, n=50)
    uf_a, if_a = user_f.copy(), item_f.copy()
    uf_b, if_b = user_f.copy(), item_f.copy()
    loss_ref = _bpr_epoch_loops(users, pos, neg, uf_a, if_a, 0.1, 0.01)
    loss_pub = bpr_epoch(users, pos, neg, uf_b, if_b, 0.1, 0.01)
    assert loss_pub == pytest.approx(loss_ref, rel=1e-9)
    np.testing.assert_allclose(uf_b, uf_a, rtol=1e-9, atol=1e-12)

    u, i, n_users, n_items = core_inputs(rng)
    np.testing.assert_array_equal(
        k_core_mask(u, i, n_users, n_items, 2, 3),
        _k_core_mask_loops(u, i, n_users, n_items, 2, 3))
