"""Sampling oracles shared by the unit and acceptance tests."""

import math

import numpy as np


def monte_carlo_returns(mdp, policy, gamma, n_traj, rng):
    """Truncated discounted returns from every start state, simulated in bulk."""
    n = mdp.n_states
    horizon = math.ceil(math.log(1e-3) / math.log(gamma))
    max_a = max(mdp.action_counts)
    act_cdf = np.ones((n, max_a))
    nxt_cdf = np.ones((n, max_a, n))
    rew = np.zeros((n, max_a, n))
    for s in range(n):
        k = mdp.n_actions(s)
        act_cdf[s, :k] = np.cumsum(policy.probs[s])
        nxt_cdf[s, :k] = np.cumsum(mdp.kernel[s], axis=1)
        rew[s, :k] = np.nan_to_num(mdp.rewards[s])
    means, errs = np.zeros(n), np.zeros(n)
    for start in range(n):
        state = np.full(n_traj, start)
        total = np.zeros(n_traj)
        for t in range(horizon):
            a = (rng.random(n_traj)[:, None] > act_cdf[state]).sum(axis=1)
            a = np.minimum(a, np.array(mdp.action_counts)[state] - 1)
            nxt = (rng.random(n_traj)[:, None] > nxt_cdf[state, a]).sum(axis=1)
            nxt = np.minimum(nxt, n - 1)
            r = rew[state, a, nxt] + mdp.reward_noise_std * rng.standard_normal(n_traj)
            total += gamma ** t * r
            state = nxt
        means[start] = total.mean()
        errs[start] = total.std(ddof=1) / math.sqrt(n_traj)
    return means, errs
