"""Parametric value families with analytic parameter gradients.

Every family exposes ``value(theta, s)``, ``grad(theta, s)`` and the batched
``values(theta)`` / ``jacobian(theta)`` used by exact expectations. The
parameter vector is always passed explicitly; ``theta0`` is the initial point.
"""

from __future__ import annotations

import numpy as np

from tdlab.errors import DimensionError


class Approximator:
    family = "abstract"

    def __init__(self, n_states: int, n_params: int, theta0: np.ndarray):
        self.n_states = n_states
        self.n_params = n_params
        self.theta0 = np.asarray(theta0, float)

    def value(self, theta, s: int) -> float:
        return float(self.values(theta)[s])

    def grad(self, theta, s: int) -> np.ndarray:
        return self.jacobian(theta)[s]

    def values(self, theta) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, theta) -> np.ndarray:
        """``(n_states, n_params)`` matrix whose row ``s`` is ``grad(theta, s)``."""
        raise NotImplementedError

    def describe(self) -> dict:
        return {"family": self.family, "n_states": self.n_states, "n_params": self.n_params}


class Tabular(Approximator):
    family = "tabular"

    def __init__(self, n_states: int):
        super().__init__(n_states, n_states, np.zeros(n_states))

    def value(self, theta, s):
        return float(theta[s])

    def grad(self, theta, s):
        g = np.zeros(self.n_params)
        g[s] = 1.0
        return g

    def values(self, theta):
        return np.array(theta, dtype=float)

    def jacobian(self, theta):
        return np.eye(self.n_states)


class Linear(Approximator):
    """``V_theta = Phi @ theta``."""

    family = "linear"

    def __init__(self, features):
        phi = np.array(features, dtype=float)
        if phi.ndim != 2:
            raise DimensionError("features must be an (n_states, k) matrix")
        phi.setflags(write=False)
        self.features = phi
        super().__init__(phi.shape[0], phi.shape[1], np.zeros(phi.shape[1]))

    def value(self, theta, s):
        return float(self.features[s] @ theta)

    def grad(self, theta, s):
        return self.features[s].copy()

    def values(self, theta):
        return self.features @ theta

    def jacobian(self, theta):
        return self.features

    def describe(self):
        return {**super().describe(), "features": self.features.tolist()}


class TwoLayer(Approximator):
    """``V_theta(s) = w . tanh(W x_s + b) + c``.

    ``theta`` is laid out as ``W`` (``width x m``, row-major), then ``b``
    (``width``), ``w`` (``width``), ``c`` (scalar), where ``m`` is the
    embedding dimension.
    """

    family = "two_layer"

    def __init__(self, embedding, width: int, theta0):
        x = np.array(embedding, dtype=float)
        if x.ndim != 2:
            raise DimensionError("embedding must be an (n_states, m) matrix")
        if width < 1:
            raise ValueError("width must be at least 1")
        x.setflags(write=False)
        self.embedding = x
        self.width = int(width)
        self.in_dim = x.shape[1]
        n_params = self.width * self.in_dim + 2 * self.width + 1
        super().__init__(x.shape[0], n_params, theta0)
        if self.theta0.shape != (n_params,):
            raise DimensionError(f"theta0 must have {n_params} entries")

    def unpack(self, theta):
        h, m = self.width, self.in_dim
        theta = np.asarray(theta, float)
        w_in = theta[: h * m].reshape(h, m)
        b = theta[h * m: h * m + h]
        w_out = theta[h * m + h: h * m + 2 * h]
        c = theta[-1]
        return w_in, b, w_out, c

    def pack(self, w_in, b, w_out, c) -> np.ndarray:
        return np.concatenate([np.ravel(w_in), b, w_out, [c]]).astype(float)

    def values(self, theta):
        w_in, b, w_out, c = self.unpack(theta)
        return np.tanh(self.embedding @ w_in.T + b) @ w_out + c

    def value(self, theta, s):
        w_in, b, w_out, c = self.unpack(theta)
        return float(np.tanh(w_in @ self.embedding[s] + b) @ w_out + c)

    def grad(self, theta, s):
        w_in, b, w_out, _ = self.unpack(theta)
        x = self.embedding[s]
        t = np.tanh(w_in @ x + b)
        db = w_out * (1.0 - t * t)
        return np.concatenate([np.outer(db, x).ravel(), db, t, [1.0]])

    def jacobian(self, theta):
        w_in, b, w_out, _ = self.unpack(theta)
        t = np.tanh(self.embedding @ w_in.T + b)        # (n, h)
        db = w_out[None, :] * (1.0 - t * t)               # (n, h)
        dw_in = db[:, :, None] * self.embedding[:, None, :]
        n = self.n_states
        return np.hstack([dw_in.reshape(n, -1), db, t, np.ones((n, 1))])

    def describe(self):
        return {**super().describe(), "width": self.width, "embedding": self.embedding.tolist()}


def make_tabular(n_states: int) -> Tabular:
    return Tabular(n_states)


def make_linear(features) -> Linear:
    return Linear(features)


def make_two_layer(embedding=None, width: int = 4, init_seed: int = 0,
                   n_states: int | None = None) -> TwoLayer:
    """Two-layer tanh network, weights drawn uniformly from ``(-0.5, 0.5)``.

    ``embedding`` defaults to one-hot state vectors (pass ``n_states``).
    """
    if width < 1:
        raise ValueError("width must be at least 1")
    if embedding is None:
        if n_states is None:
            raise ValueError("give either an embedding or n_states")
        embedding = np.eye(n_states)
    embedding = np.asarray(embedding, float)
    if n_states is not None and embedding.shape[0] != n_states:
        raise DimensionError(f"embedding has {embedding.shape[0]} rows, expected {n_states}")
    n_params = width * embedding.shape[1] + 2 * width + 1
    theta0 = np.random.default_rng(init_seed).uniform(-0.5, 0.5, n_params)
    return TwoLayer(embedding, width, theta0)


def fd_step(theta, h: float = 1e-5) -> np.ndarray:
    return h * (1.0 + np.abs(np.asarray(theta, float)))


def grad_check(approx: Approximator, theta, state: int, h: float = 1e-5) -> float:
    """Max over parameters of ``|grad_i - fd_i| / (1 + |grad_i|)``.

    ``fd_i`` is the central difference with step ``h * (1 + |theta_i|)``.
    """
    theta = np.asarray(theta, float)
    g = approx.grad(theta, state)
    steps = fd_step(theta, h)
    worst = 0.0
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = steps[i]
        up, down = theta + e, theta - e
        fd = (approx.value(up, state) - approx.value(down, state)) / (up[i] - down[i])
        worst = max(worst, abs(g[i] - fd) / (1.0 + abs(g[i])))
    return worst
