"""Stationary laws, detailed balance, mu- and Dirichlet norms, spectral gaps.

All quadratic forms use the chain's stationary distribution ``mu`` as the
reference measure. The Dirichlet form of ``f`` is

    1/2 * sum_{s,s'} mu(s) P(s,s') (f(s') - f(s))**2

which for any chain with stationary ``mu`` equals ``<(I - P) f, f>_mu``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from tdlab.errors import DimensionError, NotReversibleError, ReducibleChainError
from tdlab.mdp import Chain

DEFAULT_REVERSIBILITY_TOL = 1e-10
STATIONARY_TOL = 1e-10


def communicating_classes(p: np.ndarray) -> list[list[int]]:
    """Strongly connected components of the support digraph of ``p``."""
    n_comp, labels = connected_components(np.asarray(p) > 0, directed=True, connection="strong")
    return [np.flatnonzero(labels == k).tolist() for k in range(n_comp)]


def is_irreducible(chain: Chain) -> bool:
    return len(communicating_classes(chain.p)) == 1


def _power_iteration(p: np.ndarray, tol: float, max_iter: int = 1_000_000) -> np.ndarray:
    lazy = 0.5 * (p + np.eye(p.shape[0]))
    mu = np.full(p.shape[0], 1.0 / p.shape[0])
    for _ in range(max_iter):
        nxt = mu @ lazy
        if np.max(np.abs(nxt - mu)) < tol * 1e-2:
            return nxt / nxt.sum()
        mu = nxt
    return mu / mu.sum()


def _gth_solve(p: np.ndarray) -> np.ndarray:
    """Grassmann-Taft-Heyman elimination.

    Uses only additions of nonnegative numbers, so small stationary masses
    keep their relative accuracy even when the chain is nearly decomposable.
    """
    a = np.array(p, dtype=float)
    n = a.shape[0]
    for k in range(n - 1, 0, -1):
        exit_mass = a[k, :k].sum()
        a[:k, k] /= exit_mass
        a[:k, :k] += np.outer(a[:k, k], a[k, :k])
    mu = np.zeros(n)
    mu[0] = 1.0
    for k in range(1, n):
        mu[k] = mu[:k] @ a[:k, k]
    return mu / mu.sum()


def stationary_distribution(chain: Chain) -> np.ndarray:
    """Stationary distribution of an irreducible chain.

    Direct solve by GTH elimination; falls back to power iteration on the
    lazy chain if the residual is poor.

    Raises
    ------
    ReducibleChainError
        If the support graph has more than one strongly connected component.
    """
    p = chain.p
    classes = communicating_classes(p)
    if len(classes) > 1:
        raise ReducibleChainError(classes)
    with np.errstate(divide="ignore", invalid="ignore"):
        mu = _gth_solve(p)
    if not np.all(np.isfinite(mu)) or np.max(np.abs(mu @ p - mu)) > STATIONARY_TOL:
        mu = _power_iteration(p, STATIONARY_TOL)
    mu = np.clip(mu, 0.0, None)
    return mu / mu.sum()


@dataclass(frozen=True)
class ReversibilityCertificate:
    tolerance: float
    max_violation: float
    structural_pairs: tuple[tuple[int, int], ...]
    passed: bool


def check_reversibility(chain: Chain, tol: float = DEFAULT_REVERSIBILITY_TOL) -> ReversibilityCertificate:
    """Largest detailed-balance violation ``|mu(s)P(s,s') - mu(s')P(s',s)|``.

    Pairs with ``P(s,s') > 0`` but ``P(s',s) = 0`` are reported separately and
    always fail the certificate, whatever the numeric violation.
    """
    p = chain.p
    flow = chain.mu[:, None] * p
    viol = float(np.max(np.abs(flow - flow.T))) if p.size else 0.0
    support = p > 0
    structural = tuple((int(i), int(j)) for i, j in zip(*np.nonzero(support & ~support.T)))
    return ReversibilityCertificate(tol, viol, structural, viol <= tol and not structural)


def _check_dims(*vecs):
    n = len(vecs[0])
    if any(len(v) != n for v in vecs):
        raise DimensionError(f"dimension mismatch: {[len(v) for v in vecs]}")


def mu_inner(f, g, mu) -> float:
    f, g, mu = np.asarray(f, float), np.asarray(g, float), np.asarray(mu, float)
    _check_dims(f, g, mu)
    return float(np.sum(mu * f * g))


def mu_norm_sq(f, mu) -> float:
    return mu_inner(f, f, mu)


def mu_mean(f, mu) -> float:
    return float(np.dot(np.asarray(mu, float), np.asarray(f, float)))


def dirichlet_norm_sq(f, chain: Chain) -> float:
    """Edge-sum form ``1/2 sum mu(s) P(s,s') (f(s') - f(s))^2``."""
    f = np.asarray(f, float)
    _check_dims(f, chain.mu)
    diff = f[None, :] - f[:, None]
    return 0.5 * float(np.sum(chain.mu[:, None] * chain.p * diff * diff))


def dirichlet_via_operator(f, chain: Chain) -> float:
    """Operator form ``<(I - P) f, f>_mu``."""
    f = np.asarray(f, float)
    _check_dims(f, chain.mu)
    return mu_inner(f - chain.p @ f, f, chain.mu)


def dirichlet_matrix(chain: Chain) -> np.ndarray:
    """Symmetric matrix ``M`` with ``f^T M f`` equal to the edge-sum Dirichlet form."""
    flow = chain.mu[:, None] * chain.p
    sym = 0.5 * (flow + flow.T)
    return np.diag(sym.sum(axis=1)) - sym


@dataclass(frozen=True)
class SpectralReport:
    beta: float
    lambda2: float
    lambda_min: float
    psd: bool
    eigenvalues: tuple[float, ...] = ()


def spectral_gap(chain: Chain, tol: float = DEFAULT_REVERSIBILITY_TOL) -> SpectralReport:
    """Spectral gap ``1 - lambda_2`` of a reversible, irreducible chain.

    ``P`` is symmetrised as ``D^{1/2} P D^{-1/2}`` with ``D = diag(mu)``. The
    one-state chain has no spectrum below 1; its gap is defined as 2.
    """
    classes = communicating_classes(chain.p)
    if len(classes) > 1:
        raise ReducibleChainError(classes)
    cert = check_reversibility(chain, tol)
    if not cert.passed:
        raise NotReversibleError(
            f"spectral gap needs a reversible chain (max violation {cert.max_violation:.3e}, "
            f"structural pairs {list(cert.structural_pairs)[:5]})")
    sq = np.sqrt(chain.mu)
    s = sq[:, None] * chain.p / sq[None, :]
    s = 0.5 * (s + s.T)
    eig = np.sort(np.linalg.eigvalsh(s))[::-1]
    if chain.n == 1:
        return SpectralReport(2.0, -1.0, float(eig[0]), True, tuple(eig.tolist()))
    # the top eigenvalue of an irreducible chain is exactly 1
    lam2 = float(eig[1])
    lam_min = float(eig[-1])
    return SpectralReport(1.0 - lam2, lam2, lam_min, lam_min >= -1e-10, tuple(eig.tolist()))


@dataclass(frozen=True)
class GridSpec:
    """Regular grid of ``extent**d`` nodes with spacing ``eps``, reflecting boundary."""

    d: int
    eps: float
    extent: int

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError("grid dimension must be 1, 2 or 3")
        if self.extent < 3:
            raise ValueError("grid extent must be at least 3")
        if self.eps <= 0:
            raise ValueError("grid spacing must be positive")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.extent,) * self.d

    @property
    def n(self) -> int:
        return self.extent ** self.d

    def coordinates(self, origin: float | None = None) -> list[np.ndarray]:
        """Meshgrid of node coordinates, centred on 0 unless ``origin`` is given."""
        if origin is None:
            origin = -0.5 * (self.extent - 1) * self.eps
        axis = origin + self.eps * np.arange(self.extent)
        return np.meshgrid(*([axis] * self.d), indexing="ij")


def grid_walk_chain(spec: GridSpec) -> Chain:
    """Nearest-neighbour walk, ``1/(2d)`` per direction; blocked moves stay put."""
    n = spec.n
    p = np.zeros((n, n))
    idx = np.arange(n).reshape(spec.shape)
    step = 1.0 / (2 * spec.d)
    for node in itertools.product(range(spec.extent), repeat=spec.d):
        i = idx[node]
        for axis in range(spec.d):
            for delta in (-1, 1):
                nb = list(node)
                nb[axis] += delta
                if 0 <= nb[axis] < spec.extent:
                    p[i, idx[tuple(nb)]] += step
                else:
                    p[i, i] += step
    return Chain(p, mu=np.full(n, 1.0 / n))


@dataclass(frozen=True)
class TaylorCheck:
    dir_norm: float
    continuum_estimate: float
    ratio: float


def grid_taylor_check(f: np.ndarray, spec: GridSpec) -> TaylorCheck:
    """Compare the grid Dirichlet form with ``eps^2/(2d) * int |grad f|^2``.

    The Dirichlet form is taken with respect to the volume measure (``eps^d``
    per node) so that both sides approximate the same integral. The integral
    is a Riemann sum of centred-difference gradients.
    """
    f = np.asarray(f, float).reshape(spec.shape)
    border = np.ones(spec.shape, dtype=bool)
    border[(slice(2, -2),) * spec.d] = False
    if np.max(np.abs(f[border]), initial=0.0) > 1e-12:
        raise ValueError("field must vanish on the two outermost grid layers")
    chain = grid_walk_chain(spec)
    volume = spec.n * spec.eps ** spec.d
    dir_norm = volume * dirichlet_norm_sq(f.ravel(), chain)
    grads = np.gradient(f, spec.eps) if spec.d > 1 else [np.gradient(f, spec.eps)]
    grad_sq = sum(g * g for g in grads)
    continuum = spec.eps ** 2 / (2 * spec.d) * float(np.sum(grad_sq)) * spec.eps ** spec.d
    if continuum == 0.0 and dir_norm == 0.0:
        return TaylorCheck(0.0, 0.0, 1.0)
    return TaylorCheck(dir_norm, continuum, dir_norm / continuum)
