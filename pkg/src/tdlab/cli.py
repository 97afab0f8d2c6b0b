"""Command-line front end.

Exit codes: 0 success / all checks pass, 1 verification failure, 2 input error.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import os
import sys
from pathlib import Path

import numpy as np

from tdlab import fixtures, io
from tdlab.approximators import make_linear, make_tabular, make_two_layer
from tdlab.chains import check_reversibility, communicating_classes, spectral_gap
from tdlab.errors import InputError, TdlabError
from tdlab.mdp import expected_reward_vector, induced_chain
from tdlab.policy_grad import SoftmaxPolicy, bias_bound_check
from tdlab.reversible import gibbs_target, metropolis_chain
from tdlab.td import LearningRate, TdConfig, run_td
from tdlab.values import relative_value
from tdlab.verify import SUITES, instance_hash, run_suite

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
TD_COLUMNS = ("step", "mixed_norm", "dir_norm_sq", "mu_norm_sq", "expected_step_norm")


def default_seed() -> int:
    raw = os.environ.get("TDLAB_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise InputError(f"TDLAB_SEED must be an integer, got {raw!r}") from None


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)


def _csv_text(header, rows) -> str:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def cmd_analyze(args) -> int:
    mdp = io.load_mdp(args.mdp)
    policy = io.load_policy(args.policy, mdp)
    chain = induced_chain(mdp, policy)
    classes = communicating_classes(chain.p)
    if len(classes) > 1:
        raise InputError(f"induced chain is reducible; components {classes}", field="policy")
    cert = check_reversibility(chain, args.tol)
    reward = expected_reward_vector(mdp, policy)
    report = {
        "n_states": chain.n,
        "mu": chain.mu.tolist(),
        "reversibility": {
            "pass": cert.passed,
            "tolerance": cert.tolerance,
            "max_violation": cert.max_violation,
            "structural_pairs": [list(p) for p in cert.structural_pairs],
        },
        "average_reward": float(chain.mu @ reward),
        "expected_reward": reward.tolist(),
        "relative_value": relative_value(chain, reward).values.tolist(),
        "hash": instance_hash(chain.p, reward),
    }
    if cert.passed:
        spec = spectral_gap(chain, args.tol)
        report["spectral"] = {"beta": spec.beta, "lambda2": spec.lambda2,
                              "lambda_min": spec.lambda_min, "psd": spec.psd}
    _emit(io.dumps(report), args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.suite not in SUITES + ("all",):
        raise InputError(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES + ('all',))}",
                         field="SUITE")
    seed = default_seed() if args.seed is None else args.seed
    reports = run_suite(args.suite, args.trials, seed)
    passed = all(r.passed for r in reports)
    payload = {"suite": args.suite, "seed": seed, "trials": args.trials, "pass": passed,
               "suites": [r.to_dict() for r in reports]}
    text = io.dumps(payload)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8", newline="\n")
    for r in reports:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.suite}: {len(r.checks) - len(r.failures())}/{len(r.checks)} checks",
              file=sys.stderr)
        for c in r.failures()[:10]:
            print(f"  failed {c.check_id}: lhs={c.lhs:.6g} rhs={c.rhs:.6g} gap={c.gap:.3g} "
                  f"tol={c.tolerance:.3g}", file=sys.stderr)
    if not args.out:
        sys.stdout.write(text)
    return EXIT_OK if passed else EXIT_FAIL


def _build_family(args, n, seed):
    features = io.load_matrix(args.features) if args.features else None
    if args.family == "tabular":
        return make_tabular(n)
    if args.family == "linear":
        if features is None:
            k = args.n_features or max(1, n // 2)
            features = np.random.default_rng([seed, 1]).normal(size=(n, k))
        return make_linear(features)
    if args.family == "two_layer":
        return make_two_layer(features, width=args.width, init_seed=seed,
                              n_states=None if features is not None else n)
    raise InputError(f"unknown family {args.family!r}", field="--family")


def cmd_td(args) -> int:
    mdp = io.load_mdp(args.mdp)
    policy = io.load_policy(args.policy, mdp)
    seed = default_seed() if args.seed is None else args.seed
    try:
        lr = LearningRate.parse(args.lr)
        config = TdConfig(gamma=args.gamma, steps=args.steps, learning_rate=lr, seed=seed,
                          centering=args.center, log_interval=args.log_interval)
    except ValueError as exc:
        raise InputError(str(exc), field="--lr/--gamma/--center") from None
    approx = _build_family(args, mdp.n_states, seed)
    report = run_td(mdp, policy, approx, config)
    rows = [[r.step, r.mixed_norm, r.dir_norm_sq, r.mu_norm_sq, r.expected_step_norm]
            for r in report.records]
    Path(args.out).write_text(_csv_text(TD_COLUMNS, rows), encoding="utf-8", newline="\n")
    sidecar = {
        "config": config.to_dict(),
        "approximator": approx.describe(),
        "initial": dict(zip(TD_COLUMNS, [report.initial.step, report.initial.mixed_norm,
                                         report.initial.dir_norm_sq, report.initial.mu_norm_sq,
                                         report.initial.expected_step_norm])),
        "final_theta": report.theta.tolist(),
        "avg_reward_estimate": report.avg_reward_estimate,
        "seed": seed,
        "instance_hash": instance_hash(induced_chain(mdp, policy).p),
    }
    io.write_json(Path(args.out).with_suffix(".json"), sidecar)
    return EXIT_OK


def cmd_pg_bias(args) -> int:
    mdp = io.load_mdp(args.mdp)
    family = SoftmaxPolicy(mdp)
    phi = io.load_vector(args.phi)
    if phi.shape != (family.n_params,):
        raise InputError(f"expected {family.n_params} logits, got {phi.size}", field="phi")
    try:
        lambdas = [float(x) for x in args.uhat_noise.split(",") if x.strip()]
    except ValueError:
        raise InputError(f"invalid list {args.uhat_noise!r}", field="--uhat-noise") from None
    seed = default_seed() if args.seed is None else args.seed
    rng = np.random.default_rng(seed)
    policy = family.table(phi)
    chain = induced_chain(mdp, policy)
    u = relative_value(chain, expected_reward_vector(mdp, policy)).values
    rows, ok = [], True
    for trial in range(args.trials):
        g = rng.standard_normal(mdp.n_states)
        for lam in lambdas:
            b = bias_bound_check(mdp, family, phi, u + lam * g)
            ok &= b.slack >= -1e-10
            rows.append([trial, lam, b.lhs, b.rhs, b.slack, b.dir_norm_sq, b.fisher_trace])
    _emit(_csv_text(("trial", "lambda", "lhs", "rhs", "slack", "dir_norm_sq", "fisher_trace"), rows),
          args.out)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_metropolis(args) -> int:
    graph = io.load_graph(args.graph)
    target = args.target
    if target == "uniform":
        f = np.ones(graph.n)
    elif target.startswith("file:"):
        f = io.load_vector(target[5:])
    elif target.startswith("gibbs:"):
        parts = target.split(":", 2)
        if len(parts) != 3:
            raise InputError("expected gibbs:BETA:VALUESFILE", field="--target")
        try:
            beta = float(parts[1])
        except ValueError:
            raise InputError(f"invalid beta {parts[1]!r}", field="--target") from None
        f = gibbs_target(io.load_vector(parts[2]), beta)
    else:
        raise InputError("expected uniform, file:PATH or gibbs:BETA:VALUESFILE", field="--target")
    if f.shape != (graph.n,):
        raise InputError(f"target has {f.size} entries, graph has {graph.n} nodes", field="--target")
    try:
        chain = metropolis_chain(graph, f)
    except ValueError as exc:
        raise InputError(str(exc), field="graph") from None
    cert = check_reversibility(chain, args.tol)
    out = io.chain_to_dict(chain)
    out["certificate"] = {"pass": cert.passed, "tolerance": cert.tolerance,
                          "max_violation": cert.max_violation}
    out["target"] = (f / f.sum()).tolist()
    _emit(io.dumps(out), args.out)
    return EXIT_OK if cert.passed else EXIT_FAIL


def cmd_fixture(args) -> int:
    """Write a ready-to-use navigation fixture (mdp, policy, graph, chain, phi)."""
    seed = default_seed() if args.seed is None else args.seed
    mdp, policy, chain, graph = fixtures.navigation_fixture(seed, n=args.n)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    io.write_json(outdir / "mdp.json", io.mdp_to_dict(mdp))
    io.write_json(outdir / "policy.json", io.policy_to_dict(policy))
    io.write_json(outdir / "graph.json", io.graph_to_dict(graph))
    io.write_json(outdir / "chain.json", io.chain_to_dict(chain))
    phi = np.random.default_rng(seed).normal(size=SoftmaxPolicy(mdp).n_params)
    io.write_json(outdir / "phi.json", {"phi": phi.tolist()})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tdlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="stationary law, reversibility and spectral gap of a policy")
    p.add_argument("--mdp", required=True)
    p.add_argument("--policy", required=True)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("verify", help="run a randomised verification suite")
    p.add_argument("suite", metavar="SUITE", help=", ".join(SUITES + ("all",)))
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("td", help="simulate approximate TD(0) and log error curves")
    p.add_argument("--mdp", required=True)
    p.add_argument("--policy", required=True)
    p.add_argument("--family", choices=("tabular", "linear", "two_layer"), default="linear")
    p.add_argument("--features", help="JSON file with a 'features' matrix")
    p.add_argument("--n-features", type=int)
    p.add_argument("--width", type=int, default=4)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--lr", required=True, help="A, const:A or decay:A:TAU")
    p.add_argument("--center", choices=("none", "known", "running"), default="none")
    p.add_argument("--log-interval", type=int, default=1000)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="CSV path; a .json sidecar is written next to it")
    p.set_defaults(func=cmd_td)

    p = sub.add_parser("pg-bias", help="policy-gradient bias against its Dirichlet bound")
    p.add_argument("--mdp", required=True)
    p.add_argument("--phi", required=True)
    p.add_argument("--uhat-noise", required=True, help="comma-separated perturbation sizes")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_pg_bias)

    p = sub.add_parser("metropolis", help="build a Metropolis chain on a graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--target", default="uniform", help="uniform, file:PATH or gibbs:BETA:VALUESFILE")
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--out")
    p.set_defaults(func=cmd_metropolis)

    p = sub.add_parser("fixture", help="write a sample navigation problem to a directory")
    p.add_argument("outdir")
    p.add_argument("--n", type=int, default=6)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_fixture)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except TdlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
