import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tdlab.approximators import grad_check, make_linear, make_tabular, make_two_layer
from tdlab.errors import DimensionError


def test_tabular_value_and_grad():
    approx = make_tabular(3)
    theta = np.array([1.0, 2.0, 3.0])
    assert approx.value(theta, 1) == 2.0
    np.testing.assert_array_equal(approx.grad(theta, 1), [0.0, 1.0, 0.0])
    assert np.all(approx.theta0 == 0)


def test_identity_features_reduce_to_tabular(rng):
    theta = rng.normal(size=4)
    lin, tab = make_linear(np.eye(4)), make_tabular(4)
    np.testing.assert_array_equal(lin.values(theta), tab.values(theta))
    for s in range(4):
        np.testing.assert_array_equal(lin.grad(theta, s), tab.grad(theta, s))


def test_two_layer_constant_output():
    approx = make_two_layer(n_states=5, width=3, init_seed=1)
    w_in, b, _, _ = approx.unpack(approx.theta0)
    theta = approx.pack(w_in, b, np.zeros(3), 5.0)
    np.testing.assert_array_equal(approx.values(theta), 5.0)
    for s in range(5):
        g = approx.grad(theta, s)
        assert np.all(g[: 3 * 5 + 3] == 0)
        assert g[-1] == 1.0


def test_two_layer_layout_round_trip(rng):
    approx = make_two_layer(np.eye(3), width=2)
    theta = rng.normal(size=approx.n_params)
    np.testing.assert_array_equal(approx.pack(*approx.unpack(theta)), theta)
    assert approx.n_params == 2 * 3 + 2 + 2 + 1


def test_two_layer_init_is_seeded_uniform():
    a, b = make_two_layer(n_states=4, init_seed=3), make_two_layer(n_states=4, init_seed=3)
    np.testing.assert_array_equal(a.theta0, b.theta0)
    assert np.all(np.abs(a.theta0) < 0.5)
    assert not np.array_equal(a.theta0, make_two_layer(n_states=4, init_seed=4).theta0)


def test_constructor_errors():
    with pytest.raises(ValueError):
        make_two_layer(n_states=3, width=0)
    with pytest.raises(DimensionError):
        make_two_layer(np.eye(3), n_states=4)
    with pytest.raises(DimensionError):
        make_linear(np.ones(3))


def test_jacobian_rows_match_grad(rng):
    x = rng.normal(size=(6, 2))
    for approx in (make_tabular(6), make_linear(x), make_two_layer(x, width=4, init_seed=2)):
        theta = rng.normal(size=approx.n_params)
        jac = approx.jacobian(theta)
        vals = approx.values(theta)
        for s in range(6):
            np.testing.assert_allclose(jac[s], approx.grad(theta, s), atol=1e-15)
            assert vals[s] == pytest.approx(approx.value(theta, s), abs=1e-14)


def test_exact_families_gradient_check(rng):
    # integer parameters and dyadic steps keep central differences exact
    h = 2.0 ** -17
    tab = make_tabular(5)
    lin = make_linear(rng.integers(-3, 4, size=(5, 3)).astype(float))
    for approx in (tab, lin):
        for _ in range(20):
            theta = rng.integers(-4, 5, size=approx.n_params).astype(float)
            assert grad_check(approx, theta, int(rng.integers(5)), h=h) <= 1e-12


def test_random_gradient_checks_all_families(rng):
    x = rng.normal(size=(7, 3))
    families = [make_tabular(7), make_linear(x), make_two_layer(x, width=4, init_seed=9),
                make_two_layer(n_states=7, width=3)]
    for approx in families:
        for _ in range(100):
            theta = rng.normal(size=approx.n_params)
            assert grad_check(approx, theta, int(rng.integers(7))) <= 1e-6


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_evaluation_is_deterministic(seed):
    rng = np.random.default_rng(seed)
    approx = make_two_layer(rng.normal(size=(4, 2)), width=3, init_seed=seed % 1000)
    theta = rng.normal(size=approx.n_params)
    s = int(rng.integers(4))
    assert approx.value(theta, s) == approx.value(theta.copy(), s)
    np.testing.assert_array_equal(approx.grad(theta, s), approx.grad(theta.copy(), s))
