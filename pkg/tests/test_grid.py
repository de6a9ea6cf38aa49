import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tgvalm.grid import (div_v, div_w, global_norm, grad, inner_u, inner_v, inner_w,
                         pointwise_norm, sym_grad)


def loop_grad(u):
    m, n = u.shape
    g = np.zeros((2, m, n))
    for i in range(m):
        for j in range(n):
            if j + 1 < n:
                g[0, i, j] = u[i, j + 1] - u[i, j]
            if i + 1 < m:
                g[1, i, j] = u[i + 1, j] - u[i, j]
    return g


U22 = np.array([[1.0, 2.0], [3.0, 4.0]])


def test_grad_stencil_2x2():
    g = grad(U22)
    np.testing.assert_array_equal(g[0], [[1, 0], [1, 0]])
    np.testing.assert_array_equal(g[1], [[2, 2], [0, 0]])


def test_grad_matches_loop(rng):
    u = rng.standard_normal((5, 7))
    np.testing.assert_allclose(grad(u), loop_grad(u), rtol=0, atol=1e-15)


@pytest.mark.parametrize("u", [np.full((6, 5), 3.7), np.array([[2.5]])])
def test_grad_vanishes(u):
    assert not grad(u).any()


def test_div_of_zero():
    assert not div_v(np.zeros((2, 3, 3))).any()
    assert not div_w(np.zeros((3, 3, 3))).any()


def test_div_grad_pairing_2x2():
    g = grad(U22)
    assert inner_v(g, g) == 10.0
    assert -inner_u(U22, div_v(g)) == pytest.approx(10.0, abs=1e-14)


def test_sym_grad_stencil_2x2():
    w = np.stack([U22, np.zeros((2, 2))])
    e = sym_grad(w)
    np.testing.assert_array_equal(e[0], [[1, 0], [1, 0]])
    np.testing.assert_array_equal(e[1], 0)
    np.testing.assert_array_equal(e[2], [[1, 1], [0, 0]])
    assert inner_w(e, e) == pytest.approx(-inner_v(w, div_w(e)), abs=1e-14)


def test_sym_grad_of_constant_and_of_grad_constant():
    assert not sym_grad(np.full((2, 4, 4), 1.5)).any()
    assert not sym_grad(grad(np.full((4, 4), 2.0))).any()


@pytest.mark.parametrize("shape", [(16, 16), (1, 9), (7, 1), (3, 11)])
def test_adjointness_random(rng, shape):
    u = rng.standard_normal(shape)
    p = rng.standard_normal((2, *shape))
    w = rng.standard_normal((2, *shape))
    q = rng.standard_normal((3, *shape))
    assert abs(inner_v(grad(u), p) + inner_u(u, div_v(p))) <= 1e-12 * np.linalg.norm(u) * np.linalg.norm(p)
    assert abs(inner_w(sym_grad(w), q) + inner_v(w, div_w(q))) <= 1e-12 * np.linalg.norm(w) * np.linalg.norm(q)


def test_inner_w_weights():
    e3 = np.array([0.0, 0.0, 1.0]).reshape(3, 1, 1)
    assert inner_w(e3, e3) == 2.0
    assert inner_w(np.array([1.0, 0, 0]).reshape(3, 1, 1), np.array([0, 1.0, 0]).reshape(3, 1, 1)) == 0.0
    q = np.array([3.0, 4.0, 0.0]).reshape(3, 1, 1)
    assert inner_w(q, q) == 25.0


def test_inner_w_shape_mismatch():
    with pytest.raises(ValueError):
        inner_w(np.zeros((3, 2, 2)), np.zeros((3, 2, 3)))


def test_norms():
    q = np.array([0.0, 0.0, 1.0]).reshape(3, 1, 1)
    assert pointwise_norm(q)[0, 0] == pytest.approx(np.sqrt(2))
    p = np.array([3.0, 4.0]).reshape(2, 1, 1)
    assert global_norm(p, 1) == 5.0
    assert global_norm(p, 2) == 5.0
    assert global_norm(p, np.inf) == 5.0
    z = np.zeros((3, 4, 4))
    assert global_norm(z, 1) == global_norm(z, 2) == global_norm(z, np.inf) == 0.0
    with pytest.raises(ValueError):
        global_norm(p, 3)


finite = st.floats(-1e3, 1e3, allow_nan=False)


@settings(max_examples=50, deadline=None)
@given(arrays(float, (5, 6), elements=finite), arrays(float, (5, 6), elements=finite),
       st.floats(-10, 10), st.floats(-10, 10))
def test_grad_linear(u, v, a, b):
    lhs = grad(a * u + b * v)
    rhs = a * grad(u) + b * grad(v)
    np.testing.assert_allclose(lhs, rhs, atol=1e-9 * (1 + np.abs(rhs).max()))


@settings(max_examples=50, deadline=None)
@given(arrays(float, (6, 5), elements=finite), arrays(float, (2, 6, 5), elements=finite))
def test_negative_semidefinite(u, w):
    assert inner_u(u, div_v(grad(u))) <= 1e-9 * (1 + inner_u(u, u))
    assert inner_v(w, div_w(sym_grad(w))) <= 1e-9 * (1 + inner_v(w, w))


@settings(max_examples=50, deadline=None)
@given(arrays(float, (3, 4, 4), elements=finite))
def test_weighted_two_norm(q):
    assert global_norm(q, 2) ** 2 == pytest.approx(inner_w(q, q), rel=1e-12, abs=1e-12)
