"""Finite MDP data model, tabular policies and the induced state chain.

States and actions are dense integer indices. Action ``a`` at state ``s``
refers to position ``a`` in ``mdp.actions[s]``; names are kept only for
file round-trips.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from tdlab.errors import DimensionError

ROW_TOL = 1e-12


class Chain:
    """Row-stochastic transition matrix with a lazily computed stationary law.

    Parameters
    ----------
    p : (n, n) array_like
        Transition matrix. Rows must sum to one within ``1e-12``.
    mu : (n,) array_like, optional
        Known stationary distribution. When omitted it is computed on first
        access of :attr:`mu` by a direct linear solve.
    """

    def __init__(self, p, mu=None):
        p = np.array(p, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise DimensionError(f"transition matrix must be square, got shape {p.shape}")
        if np.any(p < 0):
            raise ValueError("transition matrix has negative entries")
        dev = np.abs(p.sum(axis=1) - 1.0)
        if np.any(dev > ROW_TOL):
            bad = int(np.argmax(dev))
            raise ValueError(f"row {bad} of transition matrix sums to {p[bad].sum()!r}")
        p.setflags(write=False)
        self._p = p
        if mu is not None:
            mu = np.array(mu, dtype=float)
            if mu.shape != (p.shape[0],):
                raise DimensionError("mu has wrong length")
            mu.setflags(write=False)
            self.__dict__["mu"] = mu

    @property
    def p(self) -> np.ndarray:
        return self._p

    @property
    def n(self) -> int:
        return self._p.shape[0]

    @cached_property
    def mu(self) -> np.ndarray:
        from tdlab.chains import stationary_distribution

        mu = stationary_distribution(self)
        mu.setflags(write=False)
        return mu

    def __repr__(self):
        return f"Chain(n={self.n})"


@dataclass(frozen=True, eq=False)
class Mdp:
    """Finite MDP.

    ``kernel[s]`` is an ``(len(actions[s]), n_states)`` array holding
    ``P_env((s, a), s')``; ``rewards[s]`` has the same shape and holds the
    mean reward ``r(s, a, s')`` collected on arrival, ``nan`` where undefined.
    """

    n_states: int
    actions: list[list[str]]
    kernel: list[np.ndarray]
    rewards: list[np.ndarray]
    reward_noise_std: float = 0.0

    def __post_init__(self):
        if len(self.actions) != self.n_states or len(self.kernel) != self.n_states \
                or len(self.rewards) != self.n_states:
            raise DimensionError("actions, kernel and rewards need one entry per state")
        for s in range(self.n_states):
            shape = (len(self.actions[s]), self.n_states)
            if self.kernel[s].shape != shape or self.rewards[s].shape != shape:
                raise DimensionError(f"state {s}: kernel/rewards must have shape {shape}")

    @classmethod
    def from_arrays(cls, kernel: Sequence, rewards: Sequence, reward_noise_std: float = 0.0,
                    names: Sequence[Sequence[str]] | None = None) -> "Mdp":
        kernel = [np.atleast_2d(np.asarray(k, dtype=float)) for k in kernel]
        rewards = [np.atleast_2d(np.asarray(r, dtype=float)) for r in rewards]
        n = len(kernel)
        if names is None:
            names = [[str(a) for a in range(k.shape[0])] for k in kernel]
        return cls(n, [list(a) for a in names], kernel, rewards, float(reward_noise_std))

    def n_actions(self, s: int) -> int:
        return len(self.actions[s])

    @property
    def action_counts(self) -> list[int]:
        return [len(a) for a in self.actions]


@dataclass(frozen=True, eq=False)
class PolicyTable:
    """Tabular policy; ``probs[s][a]`` is the probability of action ``a`` at ``s``."""

    probs: list[np.ndarray]

    @classmethod
    def uniform(cls, mdp: Mdp) -> "PolicyTable":
        return cls([np.full(k, 1.0 / k) for k in mdp.action_counts])

    @classmethod
    def from_entries(cls, mdp: Mdp, entries: Sequence[Sequence[float]]) -> "PolicyTable":
        """Build from ``(s, a, p)`` triples; omitted entries are zero."""
        probs = [np.zeros(k) for k in mdp.action_counts]
        for s, a, p in entries:
            probs[int(s)][int(a)] = float(p)
        return cls(probs)

    @staticmethod
    def mixture(first: "PolicyTable", second: "PolicyTable", weight: float) -> "PolicyTable":
        return PolicyTable([weight * a + (1.0 - weight) * b
                            for a, b in zip(first.probs, second.probs)])


def policy_diagnostics(mdp: Mdp, policy: PolicyTable) -> list[str]:
    if len(policy.probs) != mdp.n_states:
        return [f"policy covers {len(policy.probs)} states, mdp has {mdp.n_states}"]
    out = []
    for s, pr in enumerate(policy.probs):
        if pr.shape != (mdp.n_actions(s),):
            out.append(f"state {s}: policy has {pr.shape} entries, mdp has {mdp.n_actions(s)} actions")
            continue
        if np.any(pr < 0):
            out.append(f"state {s}: negative action probability")
        if abs(pr.sum() - 1.0) > ROW_TOL:
            out.append(f"state {s}: action probabilities sum to {pr.sum()!r}")
    return out


def _check_policy(mdp: Mdp, policy: PolicyTable) -> None:
    problems = policy_diagnostics(mdp, policy)
    if not problems:
        return
    if len(policy.probs) != mdp.n_states or any("entries" in p for p in problems):
        raise DimensionError("; ".join(problems))
    raise ValueError("; ".join(problems))


def induced_chain(mdp: Mdp, policy: PolicyTable) -> Chain:
    """State chain ``P(s, s') = sum_a pi(s, a) P_env((s, a), s')``."""
    _check_policy(mdp, policy)
    p = np.vstack([policy.probs[s] @ mdp.kernel[s] for s in range(mdp.n_states)])
    # renormalise away accumulated rounding so Chain's row check stays exact
    p /= p.sum(axis=1, keepdims=True)
    return Chain(p)


def _defined_rewards(mdp: Mdp, s: int) -> np.ndarray:
    return np.where(mdp.kernel[s] > 0, np.nan_to_num(mdp.rewards[s]), 0.0)


def expected_reward_vector(mdp: Mdp, policy: PolicyTable) -> np.ndarray:
    """Expected one-step reward ``R(s)`` under ``policy``."""
    _check_policy(mdp, policy)
    return np.array([
        policy.probs[s] @ np.sum(mdp.kernel[s] * _defined_rewards(mdp, s), axis=1)
        for s in range(mdp.n_states)
    ])


def mean_edge_reward(mdp: Mdp, policy: PolicyTable) -> np.ndarray:
    """Action-marginalised mean reward of each transition ``s -> s'``.

    Entries with ``P(s, s') = 0`` are ``nan``.
    """
    _check_policy(mdp, policy)
    n = mdp.n_states
    out = np.full((n, n), np.nan)
    for s in range(n):
        flow = policy.probs[s][:, None] * mdp.kernel[s]
        mass = flow.sum(axis=0)
        weighted = (flow * _defined_rewards(mdp, s)).sum(axis=0)
        on = mass > 0
        out[s, on] = weighted[on] / mass[on]
    return out


@dataclass
class TransitionSampler:
    """Draws ``(a, s', r)`` from a fixed MDP and policy.

    Each call consumes exactly two uniforms, plus one normal when the MDP
    carries reward noise, so trajectories are reproducible from the seed.
    """

    mdp: Mdp
    policy: PolicyTable
    _action_cdf: list = field(init=False, repr=False)
    _next_cdf: list = field(init=False, repr=False)

    def __post_init__(self):
        _check_policy(self.mdp, self.policy)
        self._action_cdf = [np.cumsum(p) for p in self.policy.probs]
        self._next_cdf = [np.cumsum(k, axis=1) for k in self.mdp.kernel]

    def sample(self, s: int, rng: np.random.Generator) -> tuple[int, int, float]:
        if not 0 <= s < self.mdp.n_states:
            raise IndexError(f"invalid state {s}")
        acdf = self._action_cdf[s]
        a = min(int(np.searchsorted(acdf, rng.random() * acdf[-1], side="right")), len(acdf) - 1)
        ncdf = self._next_cdf[s][a]
        s_next = min(int(np.searchsorted(ncdf, rng.random() * ncdf[-1], side="right")),
                     len(ncdf) - 1)
        r = float(self.mdp.rewards[s][a, s_next])
        if self.mdp.reward_noise_std > 0:
            r += self.mdp.reward_noise_std * rng.standard_normal()
        return a, s_next, r


def sample_transition(mdp: Mdp, policy: PolicyTable, s: int,
                      rng: np.random.Generator) -> tuple[int, int, float]:
    return TransitionSampler(mdp, policy).sample(s, rng)


def validate_mdp(mdp: Mdp) -> list[str]:
    """Return one human-readable line per violated invariant (empty if valid)."""
    diags = []
    if mdp.reward_noise_std < 0:
        diags.append("reward_noise_std is negative")
    for s in range(mdp.n_states):
        if mdp.n_actions(s) == 0:
            diags.append(f"state {s}: no actions")
            continue
        for a in range(mdp.n_actions(s)):
            row = mdp.kernel[s][a]
            if np.any(row < 0):
                diags.append(f"state {s} action {a}: negative kernel entry")
            if abs(row.sum() - 1.0) > ROW_TOL:
                diags.append(f"state {s} action {a}: row sum {row.sum():.12g} != 1")
            missing = np.flatnonzero((row > 0) & ~np.isfinite(mdp.rewards[s][a]))
            if missing.size:
                diags.append(f"state {s} action {a}: missing reward for next states "
                             f"{missing.tolist()}")
    return diags
