"""Approximate TD(0): single steps, exact expected steps and the descent identities.

For a reversible chain the expected TD step equals minus one half of the
gradient of the mixed norm

    gamma * ||V_theta - V||_Dir^2 + (1 - gamma) * ||V_theta - V||_mu^2

and, for centred TD at gamma = 1, of ``||U_theta - U||_Dir^2``. The
``theorem*_gap`` helpers evaluate both sides independently: the left with
exact sums over the chain, the right with central finite differences.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from tdlab.approximators import Approximator, Linear, Tabular, fd_step
from tdlab.chains import communicating_classes, dirichlet_matrix, dirichlet_norm_sq, mu_norm_sq
from tdlab.errors import TdlabError
from tdlab.mdp import Mdp, PolicyTable, TransitionSampler, expected_reward_vector, induced_chain
from tdlab.values import ValueVector, relative_value, value_function

CENTERING_MODES = ("none", "known", "running")


def _as_values(value_true) -> np.ndarray:
    if isinstance(value_true, ValueVector):
        return np.asarray(value_true.values, float)
    return np.asarray(value_true, float)


def td_step(approx: Approximator, theta, s: int, s_next: int, r: float, gamma: float) -> np.ndarray:
    """``(r + gamma V(s') - V(s)) * dV(s)/dtheta``."""
    delta = r + gamma * approx.value(theta, s_next) - approx.value(theta, s)
    return delta * approx.grad(theta, s)


def centered_td_step(approx: Approximator, theta, s: int, s_next: int, r: float,
                     avg_reward: float) -> np.ndarray:
    delta = r - avg_reward + approx.value(theta, s_next) - approx.value(theta, s)
    return delta * approx.grad(theta, s)


def expected_td_step(approx: Approximator, theta, chain, reward, gamma: float) -> np.ndarray:
    """Stationary expectation of the TD step, summed exactly over the chain.

    At ``gamma == 1`` the rewards are centred by ``E_mu R``.
    """
    reward = np.asarray(reward, float)
    mu = chain.mu
    if gamma == 1.0:
        reward = reward - mu @ reward
    v = approx.values(theta)
    gap = reward + gamma * (chain.p @ v) - v
    return approx.jacobian(theta).T @ (mu * gap)


@dataclass(frozen=True)
class MixedNorm:
    mixed: float
    dir_part: float
    mu_part: float


def mixed_norm_sq(approx: Approximator, theta, chain, value_true, gamma: float) -> MixedNorm:
    """``gamma ||f||_Dir^2 + (1 - gamma) ||f||_mu^2`` with ``f = V_theta - V``.

    ``dir_part`` and ``mu_part`` are the unweighted norms.
    """
    f = approx.values(theta) - _as_values(value_true)
    d = dirichlet_norm_sq(f, chain)
    m = mu_norm_sq(f, chain.mu)
    return MixedNorm(gamma * d + (1.0 - gamma) * m, d, m)


def _mixed_value(approx, theta, chain, target, gamma):
    return mixed_norm_sq(approx, theta, chain, target, gamma).mixed


def fd_gradient(func, theta, h: float = 1e-5) -> np.ndarray:
    """Central differences with per-coordinate step ``h * (1 + |theta_i|)``."""
    theta = np.asarray(theta, float)
    steps = fd_step(theta, h)
    out = np.empty_like(theta)
    for i in range(theta.size):
        up = theta.copy()
        down = theta.copy()
        up[i] += steps[i]
        down[i] -= steps[i]
        out[i] = (func(up) - func(down)) / (up[i] - down[i])
    return out


def mixed_norm_gradient(approx: Approximator, theta, chain, value_true, gamma: float,
                        mode: str = "finite-difference") -> np.ndarray:
    """Gradient of :func:`mixed_norm_sq` in ``theta``.

    ``mode="analytic"`` is available for tabular and linear families, where
    the objective is quadratic in ``theta``.
    """
    target = _as_values(value_true)
    if mode in ("analytic", "analytic-linear"):
        if not isinstance(approx, (Tabular, Linear)):
            raise TdlabError(f"analytic gradient is only defined for tabular/linear, not {approx.family}")
        f = approx.values(theta) - target
        weight = gamma * dirichlet_matrix(chain) + (1.0 - gamma) * np.diag(chain.mu)
        return 2.0 * approx.jacobian(theta).T @ (weight @ f)
    if mode in ("finite-difference", "fd"):
        return fd_gradient(lambda th: _mixed_value(approx, th, chain, target, gamma), theta)
    raise ValueError(f"unknown gradient mode {mode!r}")


@dataclass(frozen=True, eq=False)
class GapReport:
    expected_step: np.ndarray
    neg_half_grad: np.ndarray
    gap_inf_norm: float

    @property
    def step_inf_norm(self) -> float:
        return float(np.max(np.abs(self.expected_step), initial=0.0))


def _gap(expected, grad) -> GapReport:
    neg_half = -0.5 * grad
    return GapReport(expected, neg_half, float(np.max(np.abs(expected - neg_half), initial=0.0)))


def theorem1_gap(approx: Approximator, theta, chain, reward, gamma: float,
                 mode: str = "finite-difference") -> GapReport:
    """Compare the expected TD step with ``-1/2`` the mixed-norm gradient (``gamma < 1``)."""
    v = value_function(chain, reward, gamma)
    expected = expected_td_step(approx, theta, chain, reward, gamma)
    grad = mixed_norm_gradient(approx, theta, chain, v, gamma, mode=mode)
    return _gap(expected, grad)


def theorem2_gap(approx: Approximator, theta, chain, reward,
                 mode: str = "finite-difference") -> GapReport:
    """Centred TD at ``gamma = 1`` against ``-1/2`` the Dirichlet-norm gradient."""
    u = relative_value(chain, reward)
    expected = expected_td_step(approx, theta, chain, reward, 1.0)
    grad = mixed_norm_gradient(approx, theta, chain, u, 1.0, mode=mode)
    return _gap(expected, grad)


def nonreversible_correction(approx: Approximator, theta, chain, value_true) -> np.ndarray:
    """``2 sum_{s,s'} mu(s) P(s,s') dV_theta(s') (f(s') - f(s))`` with ``f = V_theta - V``.

    This is the printed correction term, evaluated as written; it needs the
    true values, which is why TD cannot follow it.
    """
    f = approx.values(theta) - _as_values(value_true)
    jac = approx.jacobian(theta)
    flow = chain.mu[:, None] * chain.p
    diff = f[None, :] - f[:, None]
    # sum over s of flow[s, s'] * diff[s, s'] gives a weight per target state s'
    return 2.0 * jac.T @ np.sum(flow * diff, axis=0)


def linear_mixed_norm_minimum(approx: Approximator, chain, value_true, gamma: float):
    """Closed-form global minimiser of the (quadratic) mixed norm for linear families.

    Returns ``(theta_star, mixed_norm_at_theta_star)``.
    """
    if not isinstance(approx, (Tabular, Linear)):
        raise TdlabError("closed-form minimiser requires a tabular or linear family")
    target = _as_values(value_true)
    phi = approx.jacobian(None)
    weight = gamma * dirichlet_matrix(chain) + (1.0 - gamma) * np.diag(chain.mu)
    lhs = phi.T @ weight @ phi
    rhs = phi.T @ weight @ target
    theta_star = np.linalg.pinv(lhs, rcond=1e-12, hermitian=True) @ rhs
    return theta_star, _mixed_value(approx, theta_star, chain, target, gamma)


@dataclass(frozen=True)
class LearningRate:
    """Constant ``alpha0`` or, with ``tau``, the schedule ``alpha0 / (1 + t / tau)``."""

    alpha0: float
    tau: float | None = None

    def __call__(self, t: int) -> float:
        if self.tau is None:
            return self.alpha0
        return self.alpha0 / (1.0 + t / self.tau)

    @classmethod
    def parse(cls, text: str) -> "LearningRate":
        """Parse ``"0.1"``, ``"const:0.1"`` or ``"decay:0.1:1000"``."""
        parts = text.strip().split(":")
        try:
            if len(parts) == 1:
                rate = cls(float(parts[0]))
            elif parts[0] == "const" and len(parts) == 2:
                rate = cls(float(parts[1]))
            elif parts[0] == "decay" and len(parts) == 3:
                rate = cls(float(parts[1]), float(parts[2]))
            else:
                raise ValueError
        except ValueError:
            raise ValueError(f"invalid learning-rate schedule {text!r}; "
                             "expected A, const:A or decay:A:TAU") from None
        if rate.alpha0 < 0 or (rate.tau is not None and rate.tau <= 0):
            raise ValueError(f"invalid learning-rate schedule {text!r}")
        return rate

    def __str__(self):
        return f"const:{self.alpha0!r}" if self.tau is None else f"decay:{self.alpha0!r}:{self.tau!r}"


@dataclass(frozen=True)
class TdConfig:
    gamma: float
    steps: int
    learning_rate: LearningRate
    seed: int = 0
    centering: str = "none"
    log_interval: int = 1000

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.steps < 1 or self.log_interval < 1:
            raise ValueError("steps and log_interval must be positive")
        if self.centering not in CENTERING_MODES:
            raise ValueError(f"centering must be one of {CENTERING_MODES}")
        if self.gamma == 1.0 and self.centering == "none":
            raise ValueError("gamma = 1 requires reward centering (known or running)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["learning_rate"] = str(self.learning_rate)
        return d


@dataclass(frozen=True)
class TdRecord:
    step: int
    mixed_norm: float
    dir_norm_sq: float
    mu_norm_sq: float
    expected_step_norm: float


@dataclass
class TdReport:
    records: list[TdRecord]
    theta: np.ndarray
    config: TdConfig
    initial: TdRecord
    avg_reward_estimate: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def final(self) -> TdRecord:
        return self.records[-1]


def _record(step, approx, theta, chain, reward, target, gamma) -> TdRecord:
    norms = mixed_norm_sq(approx, theta, chain, target, gamma)
    exp_step = expected_td_step(approx, theta, chain, reward, gamma)
    return TdRecord(step, norms.mixed, norms.dir_part, norms.mu_part,
                    float(np.linalg.norm(exp_step)))


def run_td(mdp: Mdp, policy: PolicyTable, approx: Approximator, config: TdConfig,
           theta0=None) -> TdReport:
    """Run TD(0) along one simulated trajectory.

    The start state is drawn from the stationary law; if that is unavailable
    the walk starts at state 0 and discards ``10 n`` burn-in transitions.
    Metrics are logged every ``log_interval`` steps and at the final step,
    against the exact value (``gamma < 1``) or relative value (``gamma = 1``).
    With ``centering="running"`` the reward mean is tracked by an exponential
    moving average with rate ``min(1, 10 alpha_t)``.
    """
    rng = np.random.default_rng(config.seed)
    chain = induced_chain(mdp, policy)
    reward = expected_reward_vector(mdp, policy)
    gamma = config.gamma
    sampler = TransitionSampler(mdp, policy)
    irreducible = len(communicating_classes(chain.p)) == 1

    known_avg = float(chain.mu @ reward) if irreducible else None
    if config.centering != "none" and known_avg is None:
        raise TdlabError("reward centering needs an irreducible induced chain")
    if gamma == 1.0:
        target = relative_value(chain, reward)
        logged_reward = reward
    else:
        logged_reward = reward - known_avg if config.centering != "none" else reward
        target = value_function(chain, logged_reward, gamma)

    theta = np.array(approx.theta0 if theta0 is None else theta0, dtype=float)
    if irreducible:
        s = int(rng.choice(chain.n, p=chain.mu))
    else:
        s = 0
        for _ in range(10 * chain.n):
            s = sampler.sample(s, rng)[1]

    initial = _record(0, approx, theta, chain, logged_reward, target, gamma)
    records = []
    avg = 0.0 if config.centering == "running" else known_avg
    for t in range(config.steps):
        alpha = config.learning_rate(t)
        _, s_next, r = sampler.sample(s, rng)
        if config.centering == "none":
            delta = r + gamma * approx.value(theta, s_next) - approx.value(theta, s)
        else:
            delta = r - avg + gamma * approx.value(theta, s_next) - approx.value(theta, s)
        if alpha != 0.0:
            theta += (alpha * delta) * approx.grad(theta, s)
        if config.centering == "running":
            avg += min(1.0, 10.0 * alpha) * (r - avg)
        s = s_next
        done = t + 1
        if done % config.log_interval == 0 or done == config.steps:
            records.append(_record(done, approx, theta, chain, logged_reward, target, gamma))
    assert len(records) == math.ceil(config.steps / config.log_interval)
    return TdReport(records, theta, config, initial,
                    avg_reward_estimate=None if avg is None else float(avg))
