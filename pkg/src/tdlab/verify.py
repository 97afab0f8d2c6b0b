"""Randomised verification suites behind ``tdlab verify``.

Each suite draws seeded instances, evaluates both sides of an identity or
bound, and emits one :class:`CheckRecord` per comparison. A suite passes iff
every record passes.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from tdlab import fixtures
from tdlab.chains import (
    GridSpec,
    check_reversibility,
    dirichlet_norm_sq,
    dirichlet_via_operator,
    grid_taylor_check,
    mu_norm_sq,
    spectral_gap,
)
from tdlab.mdp import Chain, expected_reward_vector, induced_chain
from tdlab.policy_grad import (
    SoftmaxPolicy,
    approx_policy_gradient,
    average_reward,
    bias_bound_check,
    policy_gradient_exact,
)
from tdlab.reversible import Graph, metropolis_chain, simple_random_walk
from tdlab.td import fd_gradient, theorem1_gap, theorem2_gap
from tdlab.values import (
    ValueVector,
    advantage_error_identity,
    bellman_residual,
    centred_bellman_residual,
    relative_value,
    value_function,
)

SUITES = ("theorem1", "theorem2", "advantage", "pg-bias", "metropolis", "grid", "norms")
GAMMAS = (0.0, 0.3, 0.9, 0.99)


@dataclass
class CheckRecord:
    check_id: str
    paper_anchor: str
    lhs: float
    rhs: float
    gap: float
    tolerance: float
    passed: bool

    def to_dict(self):
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


@dataclass
class VerificationReport:
    suite: str
    checks: list[CheckRecord] = field(default_factory=list)
    environment: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, check_id, anchor, lhs, rhs, gap, tolerance, passed):
        self.checks.append(CheckRecord(check_id, anchor, float(lhs), float(rhs), float(gap),
                                       float(tolerance), bool(passed)))

    def failures(self) -> list[CheckRecord]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "pass": self.passed,
            "n_checks": len(self.checks),
            "n_failed": len(self.failures()),
            "environment": self.environment,
            "checks": [c.to_dict() for c in self.checks],
        }


def instance_hash(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(np.asarray(a, dtype=float))
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()[:16]


def _rng(seed: int, suite: str) -> np.random.Generator:
    # independent streams per suite so "all" reproduces each suite on its own
    return np.random.default_rng([seed, SUITES.index(suite)])


def _instances(report):
    return report.environment.setdefault("instances", [])


def run_theorem1(trials: int, seed: int, theta_draws: int = 10, gammas=GAMMAS,
                 control_draws: int = 20) -> VerificationReport:
    report = VerificationReport("theorem1")
    rng = _rng(seed, "theorem1")
    for trial in range(trials):
        chain, _, _ = fixtures.random_reversible_chain(rng)
        reward = rng.normal(size=chain.n)
        _instances(report).append({"trial": trial, "n": chain.n,
                                   "hash": instance_hash(chain.p, reward)})
        for fam in fixtures.FAMILIES:
            approx = fixtures.make_family(fam, chain.n, rng)
            for gamma in gammas:
                worst = None
                for _ in range(theta_draws):
                    res = theorem1_gap(approx, fixtures.random_theta(approx, rng), chain, reward, gamma)
                    tol = max(1e-6, 1e-4 * res.step_inf_norm)
                    if worst is None or res.gap_inf_norm / tol > worst[0]:
                        worst = (res.gap_inf_norm / tol, res, tol)
                _, res, tol = worst
                report.add(f"td-descent/t{trial}/{fam}/g{gamma}", "td-expected-step=-grad/2(mixed-norm)",
                           res.step_inf_norm, float(np.max(np.abs(res.neg_half_grad))),
                           res.gap_inf_norm, tol, res.gap_inf_norm <= tol)
    # non-reversible control: directed 3-cycle, tabular family
    cycle = fixtures.directed_cycle(3)
    approx = fixtures.make_family("tabular", 3, rng)
    gaps = [theorem1_gap(approx, rng.normal(size=3), cycle, np.zeros(3), 0.9).gap_inf_norm
            for _ in range(control_draws)]
    exceed = sum(g > 1e-3 for g in gaps)
    need = control_draws - max(1, control_draws // 20)
    report.add("td-descent/control/directed-3-cycle", "non-reversible-control",
               exceed, need, min(gaps), 1e-3, exceed >= need)
    return report


def run_theorem2(trials: int, seed: int, theta_draws: int = 10) -> VerificationReport:
    report = VerificationReport("theorem2")
    rng = _rng(seed, "theorem2")
    for trial in range(trials):
        chain, _, _ = fixtures.random_reversible_chain(rng)
        reward = rng.normal(size=chain.n)
        _instances(report).append({"trial": trial, "n": chain.n,
                                   "hash": instance_hash(chain.p, reward)})
        for fam in fixtures.FAMILIES:
            approx = fixtures.make_family(fam, chain.n, rng)
            worst = None
            for _ in range(theta_draws):
                res = theorem2_gap(approx, fixtures.random_theta(approx, rng), chain, reward)
                tol = max(1e-6, 1e-4 * res.step_inf_norm)
                if worst is None or res.gap_inf_norm / tol > worst[0]:
                    worst = (res.gap_inf_norm / tol, res, tol)
            _, res, tol = worst
            report.add(f"centred-td-descent/t{trial}/{fam}", "centred-td=-grad/2(dirichlet)",
                       res.step_inf_norm, float(np.max(np.abs(res.neg_half_grad))),
                       res.gap_inf_norm, tol, res.gap_inf_norm <= tol)
    cycle = fixtures.directed_cycle(3)
    approx = fixtures.make_family("tabular", 3, rng)
    gaps = [theorem2_gap(approx, rng.normal(size=3), cycle, rng.normal(size=3)).gap_inf_norm
            for _ in range(20)]
    exceed = sum(g > 1e-3 for g in gaps)
    report.add("centred-td-descent/control/directed-3-cycle", "non-reversible-control",
               exceed, 19, min(gaps), 1e-3, exceed >= 19)
    return report


def run_advantage(trials: int, seed: int) -> VerificationReport:
    report = VerificationReport("advantage")
    rng = _rng(seed, "advantage")
    for trial in range(trials):
        if trial % 2 == 0:
            chain, _, _ = fixtures.random_reversible_chain(rng)
            kind = "reversible"
        else:
            chain = fixtures.random_dense_chain(rng, int(rng.integers(3, 10)))
            kind = "dense"
        n = chain.n
        edge_reward = np.where(chain.p > 0, rng.normal(size=(n, n)), np.nan)
        reward = np.nansum(chain.p * np.nan_to_num(edge_reward), axis=1)
        _instances(report).append({"trial": trial, "kind": kind, "n": n,
                                   "hash": instance_hash(chain.p, np.nan_to_num(edge_reward))})
        u = relative_value(chain, reward)
        u_hat = ValueVector(u.values + rng.normal(size=n), "relative", 1.0)
        ident = advantage_error_identity(chain, u, u_hat, edge_reward, 1.0)
        gap = abs(ident.lhs - ident.rhs_gamma1)
        tol = 1e-12 * (1.0 + ident.lhs)
        report.add(f"advantage-gamma1/t{trial}", "advantage-error=2*dirichlet",
                   ident.lhs, ident.rhs_gamma1, gap, tol, gap <= tol)
        res = centred_bellman_residual(chain, reward, u.values)
        report.add(f"relative-value-residual/t{trial}", "centred-bellman",
                   res, 0.0, res, 1e-10, res <= 1e-10)
        for gamma in (0.3, 0.9):
            v = value_function(chain, reward, gamma)
            v_hat = ValueVector(v.values + rng.normal(size=n), "discounted", gamma)
            ident = advantage_error_identity(chain, v, v_hat, edge_reward, gamma)
            gap = abs(ident.lhs - ident.rhs_gamma_lt1)
            tol = 1e-12 * (1.0 + ident.lhs)
            report.add(f"advantage-discounted/t{trial}/g{gamma}",
                       "advantage-error=2g*dirichlet+(1-g)^2*mu",
                       ident.lhs, ident.rhs_gamma_lt1, gap, tol, gap <= tol)
            res = bellman_residual(chain, reward, v.values, gamma)
            report.add(f"value-residual/t{trial}/g{gamma}", "bellman",
                       res, 0.0, res, 1e-10, res <= 1e-10)
    return report


def run_pg_bias(trials: int, seed: int, lambdas=(0.01, 0.1, 1.0),
                n_baselines: int = 10) -> VerificationReport:
    report = VerificationReport("pg-bias")
    rng = _rng(seed, "pg-bias")
    for trial in range(trials):
        n = int(rng.integers(2, 7))
        mdp = fixtures.random_mdp(rng, n)
        fam = SoftmaxPolicy(mdp)
        phi = rng.normal(size=fam.n_params)
        _instances(report).append({"trial": trial, "n": n, "hash": instance_hash(
            np.concatenate([k.ravel() for k in mdp.kernel]), phi)})
        policy = fam.table(phi)
        chain = induced_chain(mdp, policy)
        u = relative_value(chain, expected_reward_vector(mdp, policy)).values
        for lam in lambdas:
            b = bias_bound_check(mdp, fam, phi, u + lam * rng.normal(size=n))
            report.add(f"pg-bias-bound/t{trial}/l{lam}", "pg-bias<=2*dirichlet*fisher-trace",
                       b.lhs, b.rhs, b.slack, 1e-10, b.slack >= -1e-10)
        # quadratic scaling of the bias in the perturbation size
        g = rng.normal(size=n)
        lam = 0.1
        big = bias_bound_check(mdp, fam, phi, u + lam * g).lhs
        small = bias_bound_check(mdp, fam, phi, u + 0.5 * lam * g).lhs
        ratio = big / small if small > 0 else float("inf")
        report.add(f"pg-bias-quadratic/t{trial}", "pg-bias-scaling",
                   ratio, 4.0, abs(ratio - 4.0), 0.2, abs(ratio - 4.0) <= 0.2)
        # policy gradient theorem: exact sum vs finite differences of the average reward
        exact = policy_gradient_exact(mdp, fam, phi)
        fd = fd_gradient(lambda p: average_reward(mdp, fam, p), phi)
        gap = float(np.max(np.abs(exact - fd)))
        tol = 1e-4 * (1.0 + float(np.max(np.abs(exact))))
        report.add(f"pg-theorem/t{trial}", "policy-gradient=d(average-reward)",
                   float(np.max(np.abs(exact))), float(np.max(np.abs(fd))), gap, tol, gap <= tol)
        worst = 0.0
        for _ in range(n_baselines):
            with_b = approx_policy_gradient(mdp, fam, phi, u, baseline=rng.normal(size=n) * 10)
            worst = max(worst, float(np.max(np.abs(with_b - exact))))
        report.add(f"pg-baseline/t{trial}", "baseline-invariance",
                   worst, 0.0, worst, 1e-12, worst <= 1e-12)
    return report


def run_metropolis(trials: int, seed: int) -> VerificationReport:
    report = VerificationReport("metropolis")
    rng = _rng(seed, "metropolis")
    chain = metropolis_chain(fixtures.triangle(), [1.0, 2.0, 1.0])
    for (s, t), want in {(0, 1): 0.5, (1, 0): 0.25}.items():
        got = chain.p[s, t]
        report.add(f"metropolis-hand/triangle/P{s}{t}", "metropolis-acceptance",
                   got, want, abs(got - want), 0.0, got == want)
    worst_balance = 0.0
    for trial in range(trials):
        chain, graph, f = fixtures.random_reversible_chain(rng)
        _instances(report).append({"trial": trial, "n": graph.n, "hash": instance_hash(chain.p)})
        cert = check_reversibility(chain, 1e-12)
        worst_balance = max(worst_balance, cert.max_violation)
        report.add(f"metropolis-balance/t{trial}", "detailed-balance",
                   cert.max_violation, 0.0, cert.max_violation, 1e-12, cert.passed)
        target = f / f.sum()
        dev = float(np.max(np.abs(chain.mu - target)))
        report.add(f"metropolis-stationary/t{trial}", "stationary=f/sum(f)",
                   dev, 0.0, dev, 1e-12, dev <= 1e-12)
    report.environment["max_balance_violation"] = worst_balance
    return report


def gaussian_bump(spec: GridSpec, width: float = 0.1) -> np.ndarray:
    coords = spec.coordinates()
    r2 = sum(c * c for c in coords)
    return np.exp(-r2 / (2 * width * width))


def run_grid(trials: int, seed: int, eps: float = 0.01, half_width: float = 1.0,
             bump_width: float = 0.1) -> VerificationReport:
    report = VerificationReport("grid")
    devs = []
    for e in (eps, eps / 2):
        spec = GridSpec(1, e, int(round(2 * half_width / e)) + 1)
        res = grid_taylor_check(gaussian_bump(spec, bump_width), spec)
        devs.append(abs(res.ratio - 1.0))
        report.add(f"grid-taylor/eps{e}", "dirichlet~eps^2/2d*int|grad f|^2",
                   res.dir_norm, res.continuum_estimate, devs[-1], 0.1, devs[-1] <= 0.1)
    factor = devs[0] / devs[1] if devs[1] > 0 else float("inf")
    report.add("grid-taylor/halving", "first-order-remainder",
               factor, 2.0, abs(factor - 2.0), 1.0, 1.5 <= factor <= 3.0)
    report.environment["deviations"] = devs
    return report


def run_norms(trials: int, seed: int) -> VerificationReport:
    report = VerificationReport("norms")
    rng = _rng(seed, "norms")
    for trial in range(trials):
        chain, _, _ = fixtures.random_reversible_chain(rng)
        f = rng.normal(size=chain.n) * rng.uniform(0.1, 10.0)
        _instances(report).append({"trial": trial, "n": chain.n, "hash": instance_hash(chain.p, f)})
        spec = spectral_gap(chain)
        centred = f - chain.mu @ f
        c_norm = mu_norm_sq(centred, chain.mu)
        d_norm = dirichlet_norm_sq(f, chain)
        d_op = dirichlet_via_operator(f, chain)
        scale = 1.0 + mu_norm_sq(f, chain.mu)
        report.add(f"dirichlet-forms/t{trial}", "edge-sum=operator-form",
                   d_norm, d_op, abs(d_norm - d_op), 1e-12 * scale, abs(d_norm - d_op) <= 1e-12 * scale)
        lower = spec.beta * c_norm
        report.add(f"norm-lower/t{trial}", "gap*centred-mu<=dirichlet",
                   lower, d_norm, lower - d_norm, 1e-10, lower <= d_norm + 1e-10)
        if spec.psd:
            report.add(f"norm-upper/t{trial}", "dirichlet<=centred-mu",
                       d_norm, c_norm, d_norm - c_norm, 1e-10, d_norm <= c_norm + 1e-10)
        # the lazy chain (I + P) / 2 keeps mu and always has a nonnegative spectrum
        lazy = Chain(0.5 * (np.eye(chain.n) + chain.p), mu=chain.mu)
        d_lazy = dirichlet_norm_sq(f, lazy)
        report.add(f"norm-upper/t{trial}/lazy", "dirichlet<=centred-mu",
                   d_lazy, c_norm, d_lazy - c_norm, 1e-10, d_lazy <= c_norm + 1e-10)
        full = mu_norm_sq(f, chain.mu)
        report.add(f"norm-centring/t{trial}", "centred-mu<=mu",
                   c_norm, full, c_norm - full, 1e-10, c_norm <= full + 1e-10)
    for n in (20, 50):
        beta = spectral_gap(simple_random_walk(Graph.cycle(n))).beta
        exact = 1.0 - math.cos(2 * math.pi / n)
        if n == 20:
            report.add("cycle-gap/n20", "cycle-spectral-gap", beta, exact, abs(beta - exact), 1e-10,
                       abs(beta - exact) <= 1e-10)
        approx = 2 * math.pi ** 2 / n ** 2
        rel = abs(beta - approx) / approx
        report.add(f"cycle-gap-asymptotic/n{n}", "gap~2pi^2/n^2", beta, approx, rel, 0.05, rel <= 0.05)
    return report


RUNNERS = {
    "theorem1": run_theorem1,
    "theorem2": run_theorem2,
    "advantage": run_advantage,
    "pg-bias": run_pg_bias,
    "metropolis": run_metropolis,
    "grid": run_grid,
    "norms": run_norms,
}


def run_suite(name: str, trials: int, seed: int) -> list[VerificationReport]:
    names = SUITES if name == "all" else (name,)
    if any(n not in RUNNERS for n in names):
        raise ValueError(f"unknown suite {name!r}; choose from {SUITES + ('all',)}")
    reports = []
    for n in names:
        rep = RUNNERS[n](trials, seed)
        rep.environment.update({"seed": seed, "trials": trials})
        reports.append(rep)
    return reports
