"""Exact value functions, average reward and state advantages."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tdlab.chains import communicating_classes, dirichlet_norm_sq, mu_norm_sq
from tdlab.errors import DimensionError, ReducibleChainError
from tdlab.mdp import Chain


@dataclass(frozen=True, eq=False)
class ValueVector:
    """Values over states.

    ``kind`` is ``"discounted"`` (with ``gamma < 1``) or ``"relative"``
    (``gamma == 1``, normalised so that ``E_mu U = 0``).
    """

    values: np.ndarray
    kind: str
    gamma: float

    def __post_init__(self):
        if self.kind not in ("discounted", "relative"):
            raise ValueError(f"unknown value kind {self.kind!r}")

    def shifted(self, c: float) -> "ValueVector":
        return ValueVector(self.values + c, self.kind, self.gamma)


def bellman_residual(chain: Chain, reward, values, gamma: float) -> float:
    return float(np.max(np.abs(reward + gamma * chain.p @ values - values)))


def value_function(chain: Chain, reward, gamma: float) -> ValueVector:
    """Discounted value ``V = (I - gamma P)^{-1} R`` for ``0 <= gamma < 1``."""
    reward = np.asarray(reward, float)
    if reward.shape != (chain.n,):
        raise DimensionError("reward vector length differs from the number of states")
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma={gamma} is not in [0, 1); use relative_value for gamma = 1")
    v = np.linalg.solve(np.eye(chain.n) - gamma * chain.p, reward)
    return ValueVector(v, "discounted", float(gamma))


def average_reward_scalar(reward, mu) -> float:
    reward, mu = np.asarray(reward, float), np.asarray(mu, float)
    if reward.shape != mu.shape:
        raise DimensionError("reward and mu lengths differ")
    return float(mu @ reward)


def relative_value(chain: Chain, reward) -> ValueVector:
    """Relative value ``U`` solving ``U = (R - E_mu R) + P U`` with ``E_mu U = 0``.

    ``I - P`` is singular with kernel the constants, so the system is augmented
    with the row ``mu^T`` and target 0 and solved by least squares.
    """
    reward = np.asarray(reward, float)
    if reward.shape != (chain.n,):
        raise DimensionError("reward vector length differs from the number of states")
    classes = communicating_classes(chain.p)
    if len(classes) > 1:
        raise ReducibleChainError(classes)
    mu = chain.mu
    centred = reward - mu @ reward
    a = np.vstack([np.eye(chain.n) - chain.p, mu[None, :]])
    b = np.concatenate([centred, [0.0]])
    u, *_ = np.linalg.lstsq(a, b, rcond=None)
    u -= mu @ u
    return ValueVector(u, "relative", 1.0)


def centred_bellman_residual(chain: Chain, reward, values) -> float:
    reward = np.asarray(reward, float)
    return bellman_residual(chain, reward - chain.mu @ reward, values, 1.0)


@dataclass(frozen=True, eq=False)
class AdvantageMatrix:
    """``a[s, s']`` is the state advantage of moving to ``s'`` from ``s``.

    Entries off the support of ``P`` are ``nan``.
    """

    a: np.ndarray
    gamma: float

    def __call__(self, s: int, s_next: int) -> float:
        val = self.a[s, s_next]
        if np.isnan(val):
            raise KeyError(f"transition {s}->{s_next} has zero probability")
        return float(val)


def state_advantage(chain: Chain, value: ValueVector, edge_reward) -> AdvantageMatrix:
    """``A(s'|s) = E[r(s, s')] + gamma V(s') - V(s)`` on the support of ``P``."""
    edge_reward = np.asarray(edge_reward, float)
    v = np.asarray(value.values, float)
    gamma = value.gamma
    support = chain.p > 0
    a = np.full((chain.n, chain.n), np.nan)
    full = np.nan_to_num(edge_reward) + gamma * v[None, :] - v[:, None]
    a[support] = full[support]
    return AdvantageMatrix(a, gamma)


@dataclass(frozen=True)
class AdvantageIdentity:
    lhs: float
    rhs_gamma1: float
    rhs_gamma_lt1: float


def advantage_error_identity(chain: Chain, value_true: ValueVector, value_approx: ValueVector,
                             edge_reward, gamma: float) -> AdvantageIdentity:
    """Mean squared advantage error against its two closed forms.

    ``lhs`` is the brute-force double sum over ``s ~ mu``, ``s' ~ P(s, .)``.
    ``rhs_gamma1`` is ``2 ||g||_Dir^2`` and ``rhs_gamma_lt1`` is
    ``2 gamma ||g||_Dir^2 + (1 - gamma)^2 ||g||_mu^2`` with ``g`` the value gap.
    """
    if value_true.kind != value_approx.kind:
        raise ValueError("true and approximate values must be of the same kind")
    true_v = ValueVector(value_true.values, value_true.kind, gamma)
    approx_v = ValueVector(value_approx.values, value_approx.kind, gamma)
    adv = state_advantage(chain, true_v, edge_reward).a
    adv_hat = state_advantage(chain, approx_v, edge_reward).a
    mu, p = chain.mu, chain.p
    lhs = 0.0
    for s in range(chain.n):
        for t in range(chain.n):
            if p[s, t] > 0:
                lhs += mu[s] * p[s, t] * (adv[s, t] - adv_hat[s, t]) ** 2
    g = np.asarray(value_true.values) - np.asarray(value_approx.values)
    d = dirichlet_norm_sq(g, chain)
    return AdvantageIdentity(
        lhs=float(lhs),
        rhs_gamma1=2.0 * d,
        rhs_gamma_lt1=2.0 * gamma * d + (1.0 - gamma) ** 2 * mu_norm_sq(g, mu),
    )
