"""Constructors for reversible chains and navigation MDPs.

Metropolis chains fill the off-diagonal entries from the acceptance rule and
put the leftover mass of each row on the diagonal, which keeps the matrix
stochastic without touching detailed balance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import networkx as nx
import numpy as np

from tdlab.chains import communicating_classes
from tdlab.errors import ReducibleChainError
from tdlab.mdp import Chain, Mdp, PolicyTable


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected graph on nodes ``0 .. n-1``. Self-loops are allowed."""

    n: int
    edges: tuple[tuple[int, int], ...]

    def __init__(self, n: int, edges: Iterable[Iterable[int]]):
        canon = set()
        for e in edges:
            u, v = (int(x) for x in e)
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) references a node outside 0..{n - 1}")
            canon.add((min(u, v), max(u, v)))
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "edges", tuple(sorted(canon)))

    @property
    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.n, self.n))
        for u, v in self.edges:
            adj[u, v] = adj[v, u] = 1.0
        return adj

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    def neighbors(self, s: int) -> list[int]:
        return np.flatnonzero(self.adjacency[s]).tolist()

    def is_connected(self) -> bool:
        return len(communicating_classes(self.adjacency)) == 1

    @classmethod
    def path(cls, n: int) -> "Graph":
        return cls(n, [(i, i + 1) for i in range(n - 1)])

    @classmethod
    def cycle(cls, n: int) -> "Graph":
        return cls(n, [(i, (i + 1) % n) for i in range(n)])

    @classmethod
    def complete(cls, n: int) -> "Graph":
        return cls(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def random_connected_graph(n: int, extra_edges: int, rng: np.random.Generator) -> Graph:
    """Uniform random spanning tree on ``n`` labelled nodes plus uniform extra edges."""
    if n == 1:
        return Graph(1, [])
    seed = int(rng.integers(2**31 - 1))
    tree = nx.random_labeled_tree(n, seed=seed)
    edges = {tuple(sorted(e)) for e in tree.edges()}
    candidates = [(i, j) for i in range(n) for j in range(i + 1, n) if (i, j) not in edges]
    k = min(extra_edges, len(candidates))
    if k:
        picks = rng.choice(len(candidates), size=k, replace=False)
        edges.update(candidates[i] for i in sorted(picks))
    return Graph(n, edges)


def _require_connected(graph: Graph):
    if graph.n > 1 and np.any(graph.degrees == 0):
        isolated = np.flatnonzero(graph.degrees == 0).tolist()
        raise ValueError(f"graph has isolated nodes {isolated}")
    classes = communicating_classes(graph.adjacency + np.eye(graph.n))
    if len(classes) > 1:
        raise ReducibleChainError(classes)


def simple_random_walk(graph: Graph) -> Chain:
    """``P(s, s') = 1/deg(s)`` on edges; stationary law proportional to degree."""
    _require_connected(graph)
    adj = graph.adjacency
    if graph.n == 1 and adj.sum() == 0:
        return Chain([[1.0]])
    return Chain(adj / adj.sum(axis=1, keepdims=True))


def _check_target(f) -> np.ndarray:
    f = np.asarray(f, float)
    if np.any(~np.isfinite(f)) or np.any(f <= 0):
        raise ValueError("target weights must be finite and strictly positive")
    return f


def _fill_diagonal(p: np.ndarray) -> Chain:
    np.fill_diagonal(p, 0.0)
    off = p.sum(axis=1)
    np.fill_diagonal(p, np.clip(1.0 - off, 0.0, None))
    return Chain(p)


def metropolis_chain(graph: Graph, f) -> Chain:
    """Metropolis walk on ``graph`` targeting ``f / sum(f)``.

    For adjacent ``s != s'``: ``min(1/deg(s), f(s') / (f(s) deg(s')))``.
    """
    f = _check_target(f)
    if f.shape != (graph.n,):
        raise ValueError("target weights need one entry per node")
    _require_connected(graph)
    deg = graph.degrees
    p = np.zeros((graph.n, graph.n))
    for u, v in graph.edges:
        if u == v:
            continue
        p[u, v] = min(1.0 / deg[u], f[v] / (f[u] * deg[v]))
        p[v, u] = min(1.0 / deg[v], f[u] / (f[v] * deg[u]))
    return _fill_diagonal(p)


def metropolis_from_default(p0: Chain, f) -> Chain:
    """Metropolis correction of a default chain ``P0`` towards ``f / sum(f)``.

    Off-diagonal entries are ``min(P0(s, s'), f(s') P0(s', s) / f(s))``.
    ``P0`` must have a symmetric support.
    """
    f = _check_target(f)
    q = p0.p
    if f.shape != (q.shape[0],):
        raise ValueError("target weights need one entry per state")
    support = q > 0
    if np.any(support != support.T):
        bad = [(int(i), int(j)) for i, j in zip(*np.nonzero(support & ~support.T))]
        raise ValueError(f"default chain has asymmetric support, e.g. {bad[:5]}")
    p = np.minimum(q, f[None, :] * q.T / f[:, None])
    return _fill_diagonal(p)


def gibbs_target(v, beta: float) -> np.ndarray:
    """``exp(beta * v)`` shifted by ``max(beta * v)`` so that the largest weight is 1."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    z = beta * np.asarray(v, float)
    return np.exp(z - z.max())


def navigation_mdp_from_chain(chain: Chain, edge_rewards) -> tuple[Mdp, PolicyTable]:
    """MDP whose actions at ``s`` pick the next state among the support of ``P(s, .)``.

    The returned policy ``pi(s, a = s') = P(s, s')`` reproduces ``chain``.
    """
    edge_rewards = np.asarray(edge_rewards, float)
    n = chain.n
    if edge_rewards.shape != (n, n):
        raise ValueError("edge_rewards must be an (n, n) matrix")
    names, kernels, rewards, probs = [], [], [], []
    for s in range(n):
        targets = np.flatnonzero(chain.p[s] > 0)
        k = np.zeros((len(targets), n))
        r = np.full((len(targets), n), np.nan)
        k[np.arange(len(targets)), targets] = 1.0
        r[np.arange(len(targets)), targets] = edge_rewards[s, targets]
        names.append([str(t) for t in targets])
        kernels.append(k)
        rewards.append(r)
        probs.append(chain.p[s, targets].copy())
    return Mdp(n, names, kernels, rewards), PolicyTable(probs)
