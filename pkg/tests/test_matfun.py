import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from manisp import matfun
from manisp.errors import NotPositiveDefiniteError

from conftest import random_spd, random_sym


def test_eig_identity():
    w, q = matfun.sym_eig(np.eye(3))
    np.testing.assert_allclose(w, [1, 1, 1])
    np.testing.assert_allclose(q.T @ q, np.eye(3), atol=1e-14)


def test_eig_diagonal():
    w, q = matfun.sym_eig(np.diag([1.0, 4.0]))
    np.testing.assert_allclose(w, [4, 1])
    np.testing.assert_allclose(np.abs(q), [[0, 1], [1, 0]], atol=1e-15)


def test_eig_2x2_hand_solved():
    # characteristic polynomial (2 - l)^2 - 1 = 0 -> l in {3, 1}
    w, q = matfun.sym_eig([[2.0, 1.0], [1.0, 2.0]])
    np.testing.assert_allclose(w, [3, 1], rtol=1e-14)
    r = 1 / math.sqrt(2)
    np.testing.assert_allclose(np.abs(q[:, 0]), [r, r], rtol=1e-14)
    assert q[0, 1] * q[1, 1] < 0  # second eigenvector is (1, -1)/sqrt(2) up to sign


def test_symmetrize_on_input():
    w, _ = matfun.sym_eig([[1.0, 2.0], [0.0, 1.0]])
    np.testing.assert_allclose(w, [2, 0], atol=1e-15)


@pytest.mark.parametrize("m", [1, 2, 5, 10])
def test_eig_invariants_random(rng, m):
    for _ in range(20):
        a = random_sym(rng, m)
        w, q = matfun.sym_eig(a)
        assert np.all(np.diff(w) <= 0)
        assert np.linalg.norm(q.T @ q - np.eye(m)) <= 1e-10 * m
        assert np.linalg.norm(q @ np.diag(w) @ q.T - a) <= 1e-8 * np.linalg.norm(a)


def test_spd_fn_examples():
    np.testing.assert_allclose(matfun.spd_fn(np.eye(3), "log"), np.zeros((3, 3)), atol=1e-15)
    np.testing.assert_allclose(matfun.spd_fn(np.diag([4.0, 9.0]), "sqrt"), np.diag([2.0, 3.0]), rtol=1e-14)
    # Q diag(ln 3, ln 1) Q^T with Q from the hand-solved case
    expect = math.log(3) / 2 * np.ones((2, 2))
    np.testing.assert_allclose(matfun.spd_fn([[2.0, 1.0], [1.0, 2.0]], "log"), expect, atol=1e-14)


def test_spd_fn_rejects_non_pd():
    with pytest.raises(NotPositiveDefiniteError) as exc:
        matfun.spd_fn(np.diag([1.0, -2.0]), "log")
    assert exc.value.eigenvalue == -2.0
    with pytest.raises(NotPositiveDefiniteError):
        matfun.spd_fn(np.diag([1.0, 1e-13]), "sqrt")
    # exp accepts any symmetric input
    np.testing.assert_allclose(matfun.spd_fn(np.diag([0.0, -2.0]), "exp"), np.diag([1.0, math.exp(-2)]))


def test_floor_value_itself_is_accepted():
    a = matfun.clamp_eigenvalues(np.diag([2.0, -1.0]))
    np.testing.assert_allclose(a, np.diag([2.0, 1e-12]), atol=1e-27)
    matfun.logm(a)


def test_unknown_function():
    with pytest.raises(ValueError):
        matfun.spd_fn(np.eye(2), "cbrt")


@st.composite
def spd_matrices(draw, lo=1e-6, hi=1e6):
    m = draw(st.integers(1, 8))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    q = matfun.haar_orthogonal(m, rng)
    w = np.exp(rng.uniform(np.log(lo), np.log(hi), m))
    return q @ np.diag(w) @ q.T


@given(spd_matrices())
def test_exp_log_involution(a):
    back = matfun.expm(matfun.logm(a))
    assert np.linalg.norm(back - a) <= 1e-8 * np.linalg.norm(a)


@given(spd_matrices(lo=0.1, hi=10.0))
def test_inv_sqrt_whitens(a):
    s = matfun.inv_sqrtm(a)
    np.testing.assert_allclose(s @ a @ s, np.eye(len(a)), atol=1e-8)


def test_sqrt_squares_back(rng):
    for _ in range(100):
        a = random_spd(rng, int(rng.integers(2, 11)))
        s = matfun.sqrtm(a)
        assert np.linalg.norm(s @ s - a) <= 1e-8 * np.linalg.norm(a)


def test_batched_matches_loop(rng):
    stack = np.stack([random_spd(rng, 4) for _ in range(6)])
    batched = matfun.logm(stack)
    for a, b in zip(stack, batched):
        np.testing.assert_allclose(matfun.logm(a), b, atol=1e-13)


def test_sqrt_and_inv_sqrt_consistent(rng):
    a = random_spd(rng, 5)
    s, si = matfun.sqrt_and_inv_sqrt(a)
    np.testing.assert_allclose(s @ si, np.eye(5), atol=1e-12)


def test_deterministic(rng):
    a = random_sym(rng, 7)
    w1, q1 = matfun.sym_eig(a)
    w2, q2 = matfun.sym_eig(a.copy())
    assert np.array_equal(w1, w2) and np.array_equal(q1, q2)


def test_haar_orthogonal(rng):
    for _ in range(100):
        q = matfun.haar_orthogonal(6, rng)
        assert np.linalg.norm(q.T @ q - np.eye(6)) <= 1e-10
    signs = [matfun.haar_orthogonal(1, np.random.default_rng(s))[0, 0] for s in range(200)]
    assert set(signs) == {-1.0, 1.0}
    assert 60 < sum(s > 0 for s in signs) < 140


def test_haar_rotation_invariance_first_coordinate(rng):
    # column means of the first row vanish under the Haar measure
    n = 10_000
    samples = np.stack([matfun.haar_orthogonal(3, rng)[0] for _ in range(n)])
    mean = samples.mean(axis=0)
    stderr = samples.std(axis=0) / math.sqrt(n)
    assert np.all(np.abs(mean) <= 3 * stderr)
