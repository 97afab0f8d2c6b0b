import numpy as np
import pytest

from tdlab import fixtures
from tdlab.chains import check_reversibility, spectral_gap
from tdlab.errors import ReducibleChainError
from tdlab.mdp import Chain, induced_chain
from tdlab.reversible import (
    Graph,
    gibbs_target,
    metropolis_chain,
    metropolis_from_default,
    navigation_mdp_from_chain,
    random_connected_graph,
    simple_random_walk,
)


@pytest.fixture(scope="module")
def metropolis_instances():
    rng = np.random.default_rng(77)
    return [fixtures.random_reversible_chain(rng) for _ in range(50)]


def balance_violation(chain):
    flow = chain.mu[:, None] * chain.p
    return np.max(np.abs(flow - flow.T))


class TestGraph:
    def test_canonical_edges(self):
        g = Graph(3, [(1, 0), (0, 1), (2, 1)])
        assert g.edges == ((0, 1), (1, 2))
        np.testing.assert_array_equal(g.degrees, [1, 2, 1])
        assert g.neighbors(1) == [0, 2]

    def test_bad_node(self):
        with pytest.raises(ValueError):
            Graph(2, [(0, 2)])

    def test_random_graphs_are_connected(self, rng):
        for _ in range(30):
            n = int(rng.integers(1, 15))
            g = random_connected_graph(n, int(rng.integers(0, n + 1)), rng)
            assert g.n == n and g.is_connected()


class TestSimpleRandomWalk:
    def test_triangle(self):
        chain = simple_random_walk(Graph.complete(3))
        np.testing.assert_allclose(chain.p, (np.ones((3, 3)) - np.eye(3)) / 2)
        np.testing.assert_allclose(chain.mu, 1 / 3, atol=1e-15)

    def test_path(self):
        np.testing.assert_allclose(simple_random_walk(Graph.path(3)).mu, [0.25, 0.5, 0.25], atol=1e-15)

    def test_cycle_gap(self):
        rep = spectral_gap(simple_random_walk(Graph.cycle(20)))
        assert rep.beta == pytest.approx(1 - np.cos(2 * np.pi / 20), abs=1e-10)

    def test_isolated_node(self):
        with pytest.raises(ValueError, match="isolated"):
            simple_random_walk(Graph(3, [(0, 1)]))

    def test_disconnected(self):
        with pytest.raises(ReducibleChainError):
            simple_random_walk(Graph(4, [(0, 1), (2, 3)]))


class TestMetropolis:
    def test_hand_values(self):
        chain = metropolis_chain(Graph.complete(3), [1.0, 2.0, 1.0])
        assert chain.p[0, 1] == 0.5 and chain.p[1, 0] == 0.25
        assert chain.p[0, 1] * chain.mu[0] == pytest.approx(chain.p[1, 0] * chain.mu[1], abs=1e-16)
        np.testing.assert_allclose(chain.mu, [0.25, 0.5, 0.25], atol=1e-15)

    def test_constant_target(self, rng):
        g = random_connected_graph(8, 4, rng)
        chain = metropolis_chain(g, np.ones(8))
        deg = g.degrees
        for u, v in g.edges:
            assert chain.p[u, v] == min(1 / deg[u], 1 / deg[v])

    def test_random_instances(self, metropolis_instances):
        for chain, graph, f in metropolis_instances:
            assert check_reversibility(chain, tol=1e-12).passed
            assert balance_violation(chain) <= 1e-12
            np.testing.assert_allclose(chain.mu, f / f.sum(), atol=1e-12)
            assert np.all(chain.p >= 0)
            assert np.max(np.abs(chain.p.sum(axis=1) - 1)) <= 1e-15
            np.testing.assert_allclose(metropolis_chain(graph, 7.3 * f).p, chain.p, atol=1e-15)
            assert check_reversibility(simple_random_walk(graph), tol=1e-12).passed

    def test_rejects_bad_targets(self):
        g = Graph.path(3)
        for f in ([1.0, 0.0, 1.0], [1.0, -1.0, 2.0], [1.0, np.inf, 1.0], [1.0, 1.0]):
            with pytest.raises(ValueError):
                metropolis_chain(g, f)
        with pytest.raises(ReducibleChainError):
            metropolis_chain(Graph(4, [(0, 1), (2, 3)]), np.ones(4))


class TestFromDefault:
    def test_reversible_default_is_unchanged(self, metropolis_instances):
        for chain, _, f in metropolis_instances[:10]:
            out = metropolis_from_default(chain, f)
            off = ~np.eye(chain.n, dtype=bool)
            np.testing.assert_allclose(out.p[off], chain.p[off], atol=1e-15)

    def test_symmetric_default_constant_target(self, rng):
        a = rng.uniform(size=(5, 5))
        a = a + a.T
        p0 = Chain(a / a.sum(axis=1).max() + np.diag(1 - (a / a.sum(axis=1).max()).sum(axis=1)))
        out = metropolis_from_default(p0, np.ones(5))
        off = ~np.eye(5, dtype=bool)
        np.testing.assert_allclose(out.p[off], p0.p[off], atol=1e-15)

    def test_random_symmetric_support(self, rng):
        for _ in range(50):
            n = int(rng.integers(2, 10))
            support = rng.random((n, n)) < 0.5
            support = support | support.T | np.eye(n, dtype=bool)
            support |= np.eye(n, k=1, dtype=bool) | np.eye(n, k=-1, dtype=bool)
            q = np.where(support, rng.uniform(0.1, 1, (n, n)), 0.0)
            f = fixtures.log_uniform_target(n, rng)
            out = metropolis_from_default(Chain(q / q.sum(axis=1, keepdims=True)), f)
            assert balance_violation(out) <= 1e-14
            np.testing.assert_allclose(out.mu, f / f.sum(), atol=1e-12)

    def test_asymmetric_support_rejected(self):
        with pytest.raises(ValueError, match="asymmetric"):
            metropolis_from_default(fixtures.directed_cycle(3), np.ones(3))


class TestGibbs:
    def test_beta_zero(self, rng):
        np.testing.assert_array_equal(gibbs_target(rng.normal(size=5), 0.0), 1.0)

    def test_shift_gives_same_chain(self, rng):
        g = random_connected_graph(6, 3, rng)
        v = rng.normal(size=6)
        a = metropolis_chain(g, gibbs_target(v, 2.0))
        b = metropolis_chain(g, gibbs_target(v + 100.0, 2.0))
        np.testing.assert_allclose(a.p, b.p, atol=1e-15)

    def test_large_beta_concentrates(self, rng):
        for _ in range(10):
            v = np.sort(rng.normal(size=6))
            v[-1] = v[-2] + 0.2 + rng.uniform()
            v = rng.permutation(v)
            chain = metropolis_chain(random_connected_graph(6, 2, rng), gibbs_target(v, 50.0))
            assert chain.mu[np.argmax(v)] >= 0.99

    def test_no_overflow(self):
        f = gibbs_target([1000.0, 0.0], 10.0)
        assert f[0] == 1.0 and np.all(np.isfinite(f))

    def test_negative_beta(self):
        with pytest.raises(ValueError):
            gibbs_target([0.0], -1.0)


class TestNavigation:
    def test_round_trip(self, reversible_chains, rng):
        for chain in reversible_chains:
            mdp, policy = navigation_mdp_from_chain(chain, rng.normal(size=(chain.n, chain.n)))
            assert np.max(np.abs(induced_chain(mdp, policy).p - chain.p)) <= 1e-15

    def test_deterministic_chain_has_single_actions(self):
        mdp, _ = navigation_mdp_from_chain(fixtures.directed_cycle(4), np.zeros((4, 4)))
        assert mdp.action_counts == [1, 1, 1, 1]

    def test_triangle_self_loops(self):
        chain = metropolis_chain(Graph.complete(3), [1.0, 2.0, 1.0])
        mdp, _ = navigation_mdp_from_chain(chain, np.ones((3, 3)))
        # node 1 rejects half its proposals and keeps that mass as a self-loop
        assert chain.p[1, 1] == 0.5 and chain.p[0, 0] == 0 and chain.p[2, 2] == 0
        assert mdp.action_counts == [2, 3, 2]
        assert mdp.actions[1] == ["0", "1", "2"]

    def test_edge_rewards_shape(self):
        with pytest.raises(ValueError):
            navigation_mdp_from_chain(fixtures.directed_cycle(3), np.zeros((2, 2)))
