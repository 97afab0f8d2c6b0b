"""Softmax policies, stationary average reward and policy-gradient bias.

All expectations over transitions are exact finite sums weighted by
``xi(s, a, s') = mu(s) pi(s, a) P_env((s, a), s')``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tdlab.chains import dirichlet_norm_sq, mu_norm_sq
from tdlab.errors import DimensionError
from tdlab.mdp import Mdp, PolicyTable, expected_reward_vector, induced_chain
from tdlab.values import relative_value


class SoftmaxPolicy:
    """Per-state softmax over the actions available at each state.

    ``phi`` concatenates one logit per ``(s, a)``, states in order, actions in
    order within a state.
    """

    def __init__(self, mdp: Mdp):
        self.mdp = mdp
        counts = mdp.action_counts
        self.offsets = np.concatenate([[0], np.cumsum(counts)]).astype(int)
        self.n_params = int(self.offsets[-1])

    def _slice(self, s):
        return slice(self.offsets[s], self.offsets[s + 1])

    def _check(self, phi):
        phi = np.asarray(phi, float)
        if phi.shape != (self.n_params,):
            raise DimensionError(f"phi must have {self.n_params} entries, got {phi.shape}")
        return phi

    def state_probs(self, phi, s: int) -> np.ndarray:
        z = np.asarray(phi, float)[self._slice(s)]
        z = np.exp(z - z.max())
        return z / z.sum()

    def table(self, phi) -> PolicyTable:
        phi = self._check(phi)
        return PolicyTable([self.state_probs(phi, s) for s in range(self.mdp.n_states)])

    def log_prob_grad(self, phi, s: int, a: int) -> np.ndarray:
        """Score ``d/dphi ln pi(s, a)``: one-hot of ``(s, a)`` minus ``pi(s, .)`` on state ``s``."""
        phi = self._check(phi)
        g = np.zeros(self.n_params)
        sl = self._slice(s)
        g[sl] = -self.state_probs(phi, s)
        g[self.offsets[s] + a] += 1.0
        return g


@dataclass(frozen=True, eq=False)
class TransitionDistribution:
    """``xi[s]`` is the ``(n_actions(s), n_states)`` array of stationary transition weights."""

    xi: list[np.ndarray]

    def total(self) -> float:
        return float(sum(x.sum() for x in self.xi))


def _policy_state(mdp: Mdp, family: SoftmaxPolicy, phi):
    policy = family.table(phi)
    chain = induced_chain(mdp, policy)
    return policy, chain


def transition_distribution(mdp: Mdp, family: SoftmaxPolicy, phi) -> TransitionDistribution:
    policy, chain = _policy_state(mdp, family, phi)
    mu = chain.mu
    return TransitionDistribution([mu[s] * policy.probs[s][:, None] * mdp.kernel[s]
                                   for s in range(mdp.n_states)])


def average_reward(mdp: Mdp, family: SoftmaxPolicy, phi) -> float:
    """Stationary average reward ``sum_s mu_phi(s) R_phi(s)``."""
    policy, chain = _policy_state(mdp, family, phi)
    return float(chain.mu @ expected_reward_vector(mdp, policy))


def _gradient_sum(mdp, family, phi, u, baseline):
    policy, chain = _policy_state(mdp, family, phi)
    mu = chain.mu
    out = np.zeros(family.n_params)
    for s in range(mdp.n_states):
        probs = policy.probs[s]
        b = 0.0 if baseline is None else baseline[s]
        flow = mu[s] * probs[:, None] * mdp.kernel[s]
        rewards = np.where(mdp.kernel[s] > 0, np.nan_to_num(mdp.rewards[s]), 0.0)
        # per-action expectation of (r + U(s') - b(s)) weighted by xi
        weight = np.sum(flow * (rewards + u[None, :] - b), axis=1)
        sl = family._slice(s)
        for a in range(len(probs)):
            score = -probs.copy()
            score[a] += 1.0
            out[sl] += weight[a] * score
    return out


def _resolve_baseline(baseline, u):
    if baseline is None or (isinstance(baseline, str) and baseline == "none"):
        return None
    if isinstance(baseline, str):
        if baseline != "value":
            raise ValueError(f"unknown baseline {baseline!r}")
        return u
    return np.asarray(baseline, float)


def policy_gradient_exact(mdp: Mdp, family: SoftmaxPolicy, phi, baseline="none") -> np.ndarray:
    """Exact policy gradient ``E_xi[(r + U(s') - b(s)) d ln pi(s, a)]``.

    ``baseline`` is ``"none"``, ``"value"`` (``b = U``) or any per-state array.
    """
    policy, chain = _policy_state(mdp, family, phi)
    u = relative_value(chain, expected_reward_vector(mdp, policy)).values
    return _gradient_sum(mdp, family, phi, u, _resolve_baseline(baseline, u))


def approx_policy_gradient(mdp: Mdp, family: SoftmaxPolicy, phi, u_hat,
                           baseline="none") -> np.ndarray:
    """Same sum as :func:`policy_gradient_exact` with ``u_hat`` in place of ``U``."""
    u_hat = np.asarray(u_hat, float)
    if u_hat.shape != (mdp.n_states,):
        raise DimensionError("u_hat must have one entry per state")
    return _gradient_sum(mdp, family, phi, u_hat, _resolve_baseline(baseline, u_hat))


def fisher_trace(mdp: Mdp, family: SoftmaxPolicy, phi) -> float:
    """``E_{s ~ mu} E_{a ~ pi(s, .)} ||d ln pi(s, a)||^2``."""
    policy, chain = _policy_state(mdp, family, phi)
    total = 0.0
    for s in range(mdp.n_states):
        probs = policy.probs[s]
        for a, pa in enumerate(probs):
            score = -probs.copy()
            score[a] += 1.0
            total += chain.mu[s] * pa * float(score @ score)
    return total


@dataclass(frozen=True)
class BiasBound:
    lhs: float
    rhs: float
    slack: float
    dir_norm_sq: float
    mu_norm_sq: float
    fisher_trace: float

    @property
    def rhs_mu(self) -> float:
        """The same bound with the mu-norm of the error in place of the Dirichlet norm."""
        return 2.0 * self.mu_norm_sq * self.fisher_trace


def bias_bound_check(mdp: Mdp, family: SoftmaxPolicy, phi, u_hat) -> BiasBound:
    """``||grad_hat - grad||^2`` against ``2 ||U - u_hat||_Dir^2 * fisher_trace``.

    The Dirichlet norm uses the (possibly non-reversible) induced chain.
    """
    policy, chain = _policy_state(mdp, family, phi)
    u = relative_value(chain, expected_reward_vector(mdp, policy)).values
    u_hat = np.asarray(u_hat, float)
    exact = _gradient_sum(mdp, family, phi, u, None)
    approx = _gradient_sum(mdp, family, phi, u_hat, None)
    diff = exact - approx
    lhs = float(diff @ diff)
    err = u - u_hat
    d = dirichlet_norm_sq(err, chain)
    m = mu_norm_sq(err, chain.mu)
    fisher = fisher_trace(mdp, family, phi)
    rhs = 2.0 * d * fisher
    return BiasBound(lhs, rhs, rhs - lhs, d, m, fisher)
