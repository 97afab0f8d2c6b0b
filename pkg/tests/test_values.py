import numpy as np
import pytest

from oracles import monte_carlo_returns
from tdlab import fixtures
from tdlab.errors import ReducibleChainError
from tdlab.mdp import Chain, PolicyTable, expected_reward_vector, induced_chain, mean_edge_reward
from tdlab.values import (
    ValueVector,
    advantage_error_identity,
    average_reward_scalar,
    bellman_residual,
    centred_bellman_residual,
    relative_value,
    state_advantage,
    value_function,
)

HALF = Chain([[0.5, 0.5], [0.5, 0.5]])


def random_edge_rewards(chain, rng):
    return np.where(chain.p > 0, rng.normal(size=chain.p.shape), np.nan)


def chain_reward(chain, edge):
    return np.sum(chain.p * np.nan_to_num(edge), axis=1)


class TestValueFunction:
    def test_zero_reward(self):
        assert np.all(value_function(HALF, np.zeros(2), 0.7).values == 0)

    def test_gamma_zero_is_reward(self, rng):
        r = rng.normal(size=2)
        np.testing.assert_array_equal(value_function(HALF, r, 0.0).values, r)

    def test_hand_solve(self):
        v = value_function(HALF, [1.0, 0.0], 0.5).values
        np.testing.assert_allclose(v, [1.5, 0.5], atol=1e-15)

    def test_gamma_one_rejected(self):
        with pytest.raises(ValueError, match="relative_value"):
            value_function(HALF, [1.0, 0.0], 1.0)

    @pytest.mark.parametrize("gamma", [0.0, 0.3, 0.9, 0.99])
    def test_bellman_residual(self, gamma, rng):
        for _ in range(20):
            chain = fixtures.random_dense_chain(rng, int(rng.integers(2, 12)))
            r = rng.normal(size=chain.n)
            assert bellman_residual(chain, r, value_function(chain, r, gamma).values, gamma) <= 1e-10


class TestRelativeValue:
    def test_constant_reward(self, rng):
        chain = fixtures.random_dense_chain(rng, 5)
        np.testing.assert_allclose(relative_value(chain, np.full(5, 3.0)).values, 0, atol=1e-14)

    def test_hand_solve(self):
        np.testing.assert_allclose(relative_value(HALF, [1.0, 0.0]).values, [0.5, -0.5], atol=1e-15)

    def test_shift_also_solves(self, rng):
        chain = fixtures.random_dense_chain(rng, 6)
        r = rng.normal(size=6)
        u = relative_value(chain, r)
        assert abs(chain.mu @ u.values) < 1e-12
        assert centred_bellman_residual(chain, r, u.values + 7.0) <= 1e-10

    def test_residual_and_uniqueness(self, rng):
        for _ in range(30):
            chain = fixtures.random_dense_chain(rng, int(rng.integers(2, 12)))
            r = rng.normal(size=chain.n)
            u = relative_value(chain, r).values
            assert centred_bellman_residual(chain, r, u) <= 1e-10
            # independent solve: pseudo-inverse of I - P on centred rewards, then centred
            alt = np.linalg.pinv(np.eye(chain.n) - chain.p) @ (r - chain.mu @ r)
            alt -= chain.mu @ alt
            np.testing.assert_allclose(u, alt, atol=1e-10)

    def test_reducible(self):
        with pytest.raises(ReducibleChainError):
            relative_value(Chain(np.eye(2)), [1.0, 0.0])


def test_average_reward_scalar():
    assert average_reward_scalar(np.zeros(3), np.full(3, 1 / 3)) == 0.0
    assert average_reward_scalar([1.0, 0.0], [0.5, 0.5]) == 0.5
    assert average_reward_scalar([0.0, 3.0], [2 / 3, 1 / 3]) == pytest.approx(1.0)


class TestAdvantage:
    def test_exact_value_has_zero_mean_advantage(self, rng):
        for _ in range(10):
            chain = fixtures.random_dense_chain(rng, 5)
            edge = random_edge_rewards(chain, rng)
            r = chain_reward(chain, edge)
            u = relative_value(chain, r)
            # centring the edge rewards makes the gamma=1 Bellman gap vanish on average
            adv = state_advantage(chain, u, edge - chain.mu @ r).a
            np.testing.assert_allclose(np.nansum(chain.p * adv, axis=1), 0, atol=1e-12)

    def test_zero_rewards_constant_value(self, triangle_walk):
        adv = state_advantage(triangle_walk, ValueVector(np.full(3, 2.0), "relative", 1.0),
                              np.zeros((3, 3)))
        assert np.all(adv.a[triangle_walk.p > 0] == 0)

    def test_shift_invariance_at_gamma_one(self, rng):
        chain = fixtures.random_dense_chain(rng, 4)
        edge = random_edge_rewards(chain, rng)
        u = relative_value(chain, chain_reward(chain, edge))
        np.testing.assert_allclose(state_advantage(chain, u, edge).a,
                                   state_advantage(chain, u.shifted(3.3), edge).a, atol=1e-14)

    def test_off_support_lookup_raises(self, cycle3):
        adv = state_advantage(cycle3, ValueVector(np.zeros(3), "relative", 1.0), np.zeros((3, 3)))
        assert adv(0, 1) == 0.0
        with pytest.raises(KeyError):
            adv(1, 0)

    def test_identity_vanishes_when_exact(self, triangle_walk, rng):
        edge = random_edge_rewards(triangle_walk, rng)
        u = relative_value(triangle_walk, chain_reward(triangle_walk, edge))
        ident = advantage_error_identity(triangle_walk, u, u, edge, 1.0)
        assert ident.lhs == 0 and ident.rhs_gamma1 == 0

    @pytest.mark.parametrize("reversible", [True, False])
    def test_gamma_one_identity(self, reversible, rng):
        for _ in range(25):
            if reversible:
                chain = fixtures.random_reversible_chain(rng)[0]
            else:
                chain = fixtures.random_dense_chain(rng, int(rng.integers(3, 9)))
            edge = random_edge_rewards(chain, rng)
            u = relative_value(chain, chain_reward(chain, edge))
            u_hat = ValueVector(rng.normal(size=chain.n), "relative", 1.0)
            ident = advantage_error_identity(chain, u, u_hat, edge, 1.0)
            assert abs(ident.lhs - ident.rhs_gamma1) <= 1e-12 * (1 + ident.lhs)

    @pytest.mark.parametrize("gamma", [0.3, 0.9])
    def test_discounted_identity(self, gamma, rng):
        for _ in range(25):
            chain = fixtures.random_dense_chain(rng, int(rng.integers(3, 9)))
            edge = random_edge_rewards(chain, rng)
            v = value_function(chain, chain_reward(chain, edge), gamma)
            v_hat = ValueVector(v.values + rng.normal(size=chain.n), "discounted", gamma)
            ident = advantage_error_identity(chain, v, v_hat, edge, gamma)
            assert abs(ident.lhs - ident.rhs_gamma_lt1) <= 1e-12 * (1 + ident.lhs)
            # the weights differ from the TD mixed norm
            from tdlab.chains import dirichlet_norm_sq, mu_norm_sq
            g = v.values - v_hat.values
            mixed = gamma * dirichlet_norm_sq(g, chain) + (1 - gamma) * mu_norm_sq(g, chain.mu)
            assert abs(ident.lhs - mixed) > 1e-6


def test_monte_carlo_matches_value():
    rng = np.random.default_rng(5)
    mdp = fixtures.random_mdp(rng, 4, reward_noise_std=0.5)
    policy = PolicyTable([rng.dirichlet(np.ones(k)) for k in mdp.action_counts])
    chain = induced_chain(mdp, policy)
    gamma = 0.8
    v = value_function(chain, expected_reward_vector(mdp, policy), gamma).values
    means, errs = monte_carlo_returns(mdp, policy, gamma, 10_000, rng)
    assert np.all(np.abs(means - v) <= 3 * errs)


def test_mean_edge_reward_reproduces_expected_reward(rng):
    mdp = fixtures.random_mdp(rng, 5)
    policy = PolicyTable([rng.dirichlet(np.ones(k)) for k in mdp.action_counts])
    chain = induced_chain(mdp, policy)
    edge = mean_edge_reward(mdp, policy)
    np.testing.assert_allclose(chain_reward(chain, edge), expected_reward_vector(mdp, policy), atol=1e-14)
