"""JSON file formats for MDPs, policies, graphs, chains and vectors.

MDP::

    {"n_states": 2, "reward_noise_std": 0.0,
     "states": [{"actions": [{"name": "go", "kernel": [[1, 1.0]], "rewards": [[1, 2.5]]}]}, ...]}

Policy: ``{"probs": [[s, a_index, p], ...]}`` (omitted entries are 0).
Graph: ``{"n": 3, "edges": [[0, 1], ...]}``. Chain: ``{"p": [[...]], "mu": [...]}``.
Vector files hold a single list under ``"values"``, ``"f"`` or ``"phi"``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from tdlab.errors import InputError
from tdlab.mdp import Chain, Mdp, PolicyTable, policy_diagnostics, validate_mdp
from tdlab.reversible import Graph


def dumps(obj) -> str:
    """Stable JSON: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8", newline="\n")


def read_json(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(str(exc), field=str(path)) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}",
                         field=str(path)) from None


def _require(obj, key, where):
    if not isinstance(obj, dict) or key not in obj:
        raise InputError("missing required field", field=f"{where}.{key}" if where else key)
    return obj[key]


def _number(x, where) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise InputError(f"expected a number, got {x!r}", field=where)
    return float(x)


def _index(x, n, where) -> int:
    if isinstance(x, bool) or not isinstance(x, int) or not 0 <= x < n:
        raise InputError(f"expected an integer in [0, {n}), got {x!r}", field=where)
    return x


def _pairs(raw, n, where):
    if not isinstance(raw, list):
        raise InputError("expected a list of [state, value] pairs", field=where)
    out = []
    for i, item in enumerate(raw):
        loc = f"{where}[{i}]"
        if not isinstance(item, list) or len(item) != 2:
            raise InputError("expected a [state, value] pair", field=loc)
        out.append((_index(item[0], n, f"{loc}[0]"), _number(item[1], f"{loc}[1]")))
    return out


def mdp_from_dict(data) -> Mdp:
    n = _require(data, "n_states", "")
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise InputError("must be a positive integer", field="n_states")
    states = _require(data, "states", "")
    if not isinstance(states, list) or len(states) != n:
        raise InputError(f"expected a list of {n} states", field="states")
    noise = _number(data.get("reward_noise_std", 0.0), "reward_noise_std")
    names, kernels, rewards = [], [], []
    for s, state in enumerate(states):
        acts = _require(state, "actions", f"states[{s}]")
        if not isinstance(acts, list) or not acts:
            raise InputError("every state needs at least one action", field=f"states[{s}].actions")
        kern = np.zeros((len(acts), n))
        rew = np.full((len(acts), n), np.nan)
        state_names = []
        for a, act in enumerate(acts):
            where = f"states[{s}].actions[{a}]"
            state_names.append(str(act.get("name", a)) if isinstance(act, dict) else str(a))
            for t, p in _pairs(_require(act, "kernel", where), n, f"{where}.kernel"):
                kern[a, t] += p
            for t, r in _pairs(act.get("rewards", []) if isinstance(act, dict) else [], n,
                               f"{where}.rewards"):
                rew[a, t] = r
        names.append(state_names)
        kernels.append(kern)
        rewards.append(rew)
    mdp = Mdp(n, names, kernels, rewards, noise)
    problems = validate_mdp(mdp)
    if problems:
        raise InputError("; ".join(problems), field="states")
    return mdp


def mdp_to_dict(mdp: Mdp) -> dict:
    states = []
    for s in range(mdp.n_states):
        acts = []
        for a, name in enumerate(mdp.actions[s]):
            support = np.flatnonzero(mdp.kernel[s][a] > 0)
            acts.append({
                "name": name,
                "kernel": [[int(t), float(mdp.kernel[s][a, t])] for t in support],
                "rewards": [[int(t), float(mdp.rewards[s][a, t])] for t in support
                            if np.isfinite(mdp.rewards[s][a, t])],
            })
        states.append({"actions": acts})
    return {"n_states": mdp.n_states, "reward_noise_std": mdp.reward_noise_std, "states": states}


def load_mdp(path) -> Mdp:
    return mdp_from_dict(read_json(path))


def policy_from_dict(data, mdp: Mdp) -> PolicyTable:
    raw = _require(data, "probs", "")
    if not isinstance(raw, list):
        raise InputError("expected a list of [s, a, p] triples", field="probs")
    probs = [np.zeros(k) for k in mdp.action_counts]
    for i, item in enumerate(raw):
        loc = f"probs[{i}]"
        if not isinstance(item, list) or len(item) != 3:
            raise InputError("expected an [s, a, p] triple", field=loc)
        s = _index(item[0], mdp.n_states, f"{loc}[0]")
        a = _index(item[1], mdp.n_actions(s), f"{loc}[1]")
        probs[s][a] = _number(item[2], f"{loc}[2]")
    policy = PolicyTable(probs)
    problems = policy_diagnostics(mdp, policy)
    if problems:
        raise InputError("; ".join(problems), field="probs")
    return policy


def policy_to_dict(policy: PolicyTable) -> dict:
    return {"probs": [[s, a, float(p)] for s, row in enumerate(policy.probs)
                      for a, p in enumerate(row) if p > 0]}


def load_policy(path, mdp: Mdp) -> PolicyTable:
    return policy_from_dict(read_json(path), mdp)


def graph_from_dict(data) -> Graph:
    n = _require(data, "n", "")
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise InputError("must be a positive integer", field="n")
    edges = _require(data, "edges", "")
    if not isinstance(edges, list):
        raise InputError("expected a list of [u, v] pairs", field="edges")
    parsed = []
    for i, e in enumerate(edges):
        if not isinstance(e, list) or len(e) != 2:
            raise InputError("expected a [u, v] pair", field=f"edges[{i}]")
        parsed.append((_index(e[0], n, f"edges[{i}][0]"), _index(e[1], n, f"edges[{i}][1]")))
    return Graph(n, parsed)


def graph_to_dict(graph: Graph) -> dict:
    return {"n": graph.n, "edges": [list(e) for e in graph.edges]}


def load_graph(path) -> Graph:
    return graph_from_dict(read_json(path))


def chain_to_dict(chain: Chain, with_mu: bool = True) -> dict:
    out = {"p": chain.p.tolist()}
    if with_mu:
        out["mu"] = chain.mu.tolist()
    return out


def chain_from_dict(data) -> Chain:
    p = _require(data, "p", "")
    try:
        return Chain(p, mu=data.get("mu"))
    except ValueError as exc:
        raise InputError(str(exc), field="p") from None


def load_vector(path, keys=("values", "f", "phi")) -> np.ndarray:
    data = read_json(path)
    if isinstance(data, list):
        raw, where = data, "<root>"
    else:
        key = next((k for k in keys if isinstance(data, dict) and k in data), None)
        if key is None:
            raise InputError(f"expected one of the fields {list(keys)}", field=str(path))
        raw, where = data[key], key
    if not isinstance(raw, list):
        raise InputError("expected a list of numbers", field=where)
    return np.array([_number(x, f"{where}[{i}]") for i, x in enumerate(raw)])


def load_matrix(path, key: str = "features") -> np.ndarray:
    data = read_json(path)
    raw = data.get(key) if isinstance(data, dict) else data
    if not isinstance(raw, list) or not raw or not all(isinstance(r, list) for r in raw):
        raise InputError("expected a non-empty list of rows", field=key)
    width = len(raw[0])
    rows = []
    for i, r in enumerate(raw):
        if len(r) != width:
            raise InputError(f"row has {len(r)} entries, expected {width}", field=f"{key}[{i}]")
        rows.append([_number(x, f"{key}[{i}][{j}]") for j, x in enumerate(r)])
    return np.array(rows)
