"""Seeded random instances shared by the verification suites and the tests."""

from __future__ import annotations

import numpy as np

from tdlab.approximators import make_linear, make_tabular, make_two_layer
from tdlab.mdp import Chain, Mdp, PolicyTable
from tdlab.reversible import Graph, metropolis_chain, navigation_mdp_from_chain, random_connected_graph

FAMILIES = ("tabular", "linear", "two_layer")


def log_uniform_target(n: int, rng: np.random.Generator, low: float = 0.1, high: float = 10.0):
    return np.exp(rng.uniform(np.log(low), np.log(high), n))


def random_reversible_chain(rng: np.random.Generator, n_min: int = 3, n_max: int = 12):
    """Metropolis chain on a random connected graph. Returns ``(chain, graph, f)``."""
    n = int(rng.integers(n_min, n_max + 1))
    graph = random_connected_graph(n, int(rng.integers(0, n + 1)), rng)
    f = log_uniform_target(n, rng)
    return metropolis_chain(graph, f), graph, f


def random_dense_chain(rng: np.random.Generator, n: int) -> Chain:
    """Strictly positive random chain; almost surely not reversible for ``n >= 3``."""
    p = rng.uniform(0.05, 1.0, (n, n))
    return Chain(p / p.sum(axis=1, keepdims=True))


def directed_cycle(n: int = 3) -> Chain:
    p = np.zeros((n, n))
    p[np.arange(n), (np.arange(n) + 1) % n] = 1.0
    return Chain(p)


def triangle() -> Graph:
    return Graph.complete(3)


def random_mdp(rng: np.random.Generator, n: int, max_actions: int = 3,
               reward_noise_std: float = 0.0) -> Mdp:
    """Dense random MDP: every action reaches every state with positive probability."""
    kernels, rewards = [], []
    for _ in range(n):
        k = int(rng.integers(1, max_actions + 1))
        kern = rng.dirichlet(np.ones(n), size=k)
        kern = np.maximum(kern, 1e-3)
        kernels.append(kern / kern.sum(axis=1, keepdims=True))
        rewards.append(rng.normal(size=(k, n)))
    return Mdp.from_arrays(kernels, rewards, reward_noise_std)


def make_family(name: str, n: int, rng: np.random.Generator, width: int = 3):
    if name == "tabular":
        return make_tabular(n)
    if name == "linear":
        return make_linear(rng.normal(size=(n, max(1, n // 2))))
    if name == "two_layer":
        return make_two_layer(n_states=n, width=width, init_seed=int(rng.integers(2**31 - 1)))
    raise ValueError(f"unknown family {name!r}")


def random_theta(approx, rng: np.random.Generator) -> np.ndarray:
    return rng.normal(size=approx.n_params)


def navigation_fixture(seed: int = 0, n: int = 6, reward_scale: float = 1.0):
    """Six-node reversible navigation problem: ``(mdp, policy, chain, graph)``.

    The walk is a Metropolis chain on a random connected graph; edge rewards
    are standard normal, scaled by ``reward_scale``.
    """
    rng = np.random.default_rng(seed)
    graph = random_connected_graph(n, n // 2, rng)
    f = log_uniform_target(n, rng, 0.5, 2.0)
    chain = metropolis_chain(graph, f)
    edge_rewards = reward_scale * rng.normal(size=(n, n))
    mdp, policy = navigation_mdp_from_chain(chain, edge_rewards)
    return mdp, policy, chain, graph


def single_action_mdp(chain: Chain, edge_rewards) -> tuple[Mdp, PolicyTable]:
    """One action per state whose environment kernel is the chain row."""
    n = chain.n
    edge_rewards = np.asarray(edge_rewards, float)
    mdp = Mdp.from_arrays([chain.p[s][None, :] for s in range(n)],
                          [edge_rewards[s][None, :] for s in range(n)])
    return mdp, PolicyTable.uniform(mdp)
