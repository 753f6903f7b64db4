import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import brute_force_block, fd_jacobian
from l96bif.model import (
    ModelParams,
    block_deviation,
    divisors,
    factorize_dimension,
    jacobian,
    lift,
    project,
    shift,
    shift_matrix,
    symmetry_signature,
    trivial_equilibrium,
    vector_field,
)

dims = st.integers(min_value=1, max_value=16)
forcing = st.floats(min_value=-12, max_value=12, allow_nan=False)


def states(n, bound=10.0):
    return st.lists(
        st.floats(min_value=-bound, max_value=bound, allow_nan=False), min_size=n, max_size=n
    ).map(np.array)


@st.composite
def state_and_params(draw):
    n = draw(dims)
    return draw(states(n)), ModelParams(n, draw(forcing))


# ---------------------------------------------------------------------------
# parameters and factorisation


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(0, 1.0)
    with pytest.raises(ValueError):
        ModelParams(4, math.nan)
    with pytest.raises(ValueError):
        ModelParams(2048, 1.0)
    assert ModelParams(4, 1).F == 1.0
    assert ModelParams(4, 1.0).with_forcing(-2.0) == ModelParams(4, -2.0)


@pytest.mark.parametrize(
    "n, q, p", [(1, 0, 1), (2, 1, 1), (12, 2, 3), (24, 3, 3), (28, 2, 7), (512, 9, 1), (7, 0, 7)]
)
def test_factorize_dimension(n, q, p):
    f = factorize_dimension(n)
    assert (f.q, f.p) == (q, p)
    assert f.n == 2**f.q * f.p and f.p % 2 == 1


@given(st.integers(min_value=1, max_value=2000))
def test_divisors_brute_force(n):
    assert divisors(n) == [d for d in range(1, n + 1) if n % d == 0]


# ---------------------------------------------------------------------------
# vector field and Jacobian


def test_trivial_equilibrium_is_root():
    for n in (1, 2, 3, 4, 9):
        params = ModelParams(n, -2.5)
        assert np.all(vector_field(trivial_equilibrium(params), params) == 0)


def test_vector_field_explicit_loop():
    # oracle: the defining formula, written index by index
    rng = np.random.default_rng(0)
    for n in (1, 2, 3, 4, 7):
        x = rng.normal(size=n)
        params = ModelParams(n, 0.7)
        expect = [x[(j - 1) % n] * (x[(j + 1) % n] - x[(j - 2) % n]) - x[j] + 0.7 for j in range(n)]
        np.testing.assert_allclose(vector_field(x, params), expect, rtol=0, atol=1e-14)


def test_jacobian_at_trivial_equilibrium_n4():
    F = 1.7
    J = jacobian(np.full(4, F), ModelParams(4, F))
    np.testing.assert_array_equal(J[0], [-1.0, F, -F, 0.0])
    # circulant structure
    for i in range(4):
        np.testing.assert_array_equal(J[i], np.roll(J[0], i))


def test_jacobian_small_dimensions_accumulate():
    # n = 2: f_0 = x_1 (x_1 - x_0) - x_0 + F, so row 0 is (-x_1 - 1, 2 x_1 - x_0)
    a, b = 0.3, -1.2
    J = jacobian([a, b], ModelParams(2, 1.0))
    np.testing.assert_allclose(J[0], [-b - 1, 2 * b - a], atol=1e-15)
    np.testing.assert_allclose(J[1], [2 * a - b, -a - 1], atol=1e-15)
    # n = 1: f = -x + F
    assert jacobian([2.0], ModelParams(1, 1.0))[0, 0] == -1.0


@settings(max_examples=60, deadline=None)
@given(state_and_params())
def test_jacobian_matches_finite_differences(sp):
    x, params = sp
    np.testing.assert_allclose(jacobian(x, params), fd_jacobian(x, params), atol=1e-6)


@settings(max_examples=80, deadline=None)
@given(state_and_params(), st.integers(min_value=-20, max_value=20))
def test_vector_field_is_shift_equivariant(sp, k):
    x, params = sp
    np.testing.assert_array_equal(vector_field(shift(x, k), params), shift(vector_field(x, params), k))


@settings(max_examples=40, deadline=None)
@given(state_and_params(), st.integers(min_value=0, max_value=15))
def test_jacobian_is_shift_covariant(sp, k):
    x, params = sp
    S = shift_matrix(params.n, k)
    np.testing.assert_allclose(jacobian(shift(x, k), params), S @ jacobian(x, params) @ S.T, atol=1e-12)


# ---------------------------------------------------------------------------
# shift, lift and project


def test_shift_convention():
    x = np.arange(5.0)
    np.testing.assert_array_equal(shift(x, 1), [1, 2, 3, 4, 0])
    np.testing.assert_array_equal(shift(x, -1), [4, 0, 1, 2, 3])
    np.testing.assert_array_equal(shift(x, 5), x)
    np.testing.assert_array_equal(shift_matrix(5, 2) @ x, shift(x, 2))


def test_lift_project_roundtrip():
    y = np.array([1.0, -2.0, 0.5])
    x = lift(y, 4)
    assert x.size == 12
    np.testing.assert_array_equal(project(x, 3), y)
    assert block_deviation(x, 3) == 0.0
    with pytest.raises(ValueError):
        project(x, 5)
    with pytest.raises(ValueError):
        lift(y, 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.integers(1, 6), forcing, st.data())
def test_lift_commutes_with_field(m, k, F, data):
    y = data.draw(states(m))
    lhs = vector_field(lift(y, k), ModelParams(m * k, F))
    rhs = lift(vector_field(y, ModelParams(m, F)), k)
    np.testing.assert_array_equal(lhs, rhs)


# ---------------------------------------------------------------------------
# symmetry signature


def test_signature_examples():
    assert symmetry_signature(np.full(6, 2.0)).m == 1
    assert symmetry_signature(np.tile([1.0, 2.0], 3)).m == 2
    assert symmetry_signature(np.arange(7.0)).m == 7
    sig = symmetry_signature(np.tile([1.0, 2.0, 3.0], 4))
    assert sig.m == 3 and sig.n == 12 and sig.orbit_size == 3
    np.testing.assert_array_equal(sig.block, [1, 2, 3])


def test_signature_on_snapshots():
    a = np.tile([1.0, 2.0], 2)
    b = np.tile([0.0, 5.0], 2)
    assert symmetry_signature(np.vstack([a, b])).m == 2
    assert symmetry_signature(np.vstack([a, [1.0, 2.0, 1.0, 3.0]])).m == 4


def test_signature_rejects_bad_tolerance():
    with pytest.raises(ValueError):
        symmetry_signature(np.ones(4), tol=0.0)


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8), st.data())
def test_signature_matches_brute_force(m, k, data):
    # values on a coarse grid so accidental sub-periods are exercised too
    y = np.array(data.draw(st.lists(st.integers(-2, 2), min_size=m, max_size=m)), dtype=float)
    x = lift(y, k)
    assert symmetry_signature(x).m == brute_force_block(x, 1e-8)
    assert symmetry_signature(x).m <= m


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8), st.data())
def test_signature_tolerance(m, k, data):
    y = data.draw(states(m))
    noise = data.draw(st.floats(min_value=0, max_value=1e-10))
    x = lift(y, k) + noise * np.cos(np.arange(m * k))
    assert symmetry_signature(x, 1e-8).m == brute_force_block(x, 1e-8)
