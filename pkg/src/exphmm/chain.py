"""Latent Markov chain: log-space forward-backward and a path-enumeration oracle."""
import itertools
from dataclasses import dataclass

import numba as nb
import numpy as np
from scipy.special import logsumexp

PROB_ATOL = 1e-12


@dataclass(frozen=True)
class ChainParams:
    """Initial law ``pi`` (K,) and row-stochastic transition matrix ``Pi`` (K, K)."""

    pi: np.ndarray
    Pi: np.ndarray

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float)
        Pi = np.asarray(self.Pi, dtype=float)
        if pi.ndim != 1 or Pi.shape != (pi.size, pi.size):
            raise ValueError(f"shape mismatch: pi {pi.shape}, Pi {Pi.shape}")
        if np.any(pi < 0) or np.any(Pi < 0):
            raise ValueError("probabilities must be nonnegative")
        if abs(pi.sum() - 1.0) > PROB_ATOL:
            raise ValueError(f"pi sums to {pi.sum()!r}, not 1")
        if np.any(np.abs(Pi.sum(axis=1) - 1.0) > PROB_ATOL):
            raise ValueError("rows of Pi must sum to 1")
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "Pi", Pi)

    @property
    def K(self):
        return self.pi.size

    def permute(self, order):
        order = np.asarray(order)
        return ChainParams(self.pi[order], self.Pi[np.ix_(order, order)])


@dataclass(frozen=True)
class Posteriors:
    """Smoothed marginals ``gamma`` (T, K), pairwise ``xi`` (T-1, K, K) and log-likelihood.

    ``xi[t - 1, j, k]`` is P(S_{t-1} = j, S_t = k | y) for t = 2..T.
    """

    gamma: np.ndarray
    xi: np.ndarray
    loglik: float

    def permute(self, order):
        order = np.asarray(order)
        return Posteriors(self.gamma[:, order], self.xi[:, order][:, :, order], self.loglik)


def _safe_log(a):
    with np.errstate(divide="ignore"):
        return np.log(a)


@nb.njit(cache=True)
def _lse(v):
    m = -np.inf
    for x in v:
        if x > m:
            m = x
    if m == -np.inf:
        return -np.inf
    s = 0.0
    for x in v:
        s += np.exp(x - m)
    return m + np.log(s)


@nb.njit(cache=True)
def _forward_backward_log(log_e, log_pi, log_P):
    T, K = log_e.shape
    la = np.empty((T, K))
    lb = np.zeros((T, K))
    tmp = np.empty(K)
    for k in range(K):
        la[0, k] = log_pi[k] + log_e[0, k]
    for t in range(1, T):
        for k in range(K):
            for j in range(K):
                tmp[j] = la[t - 1, j] + log_P[j, k]
            la[t, k] = _lse(tmp) + log_e[t, k]
    loglik = _lse(la[T - 1])
    for t in range(T - 2, -1, -1):
        for j in range(K):
            for k in range(K):
                tmp[k] = log_P[j, k] + log_e[t + 1, k] + lb[t + 1, k]
            lb[t, j] = _lse(tmp)
    gamma = np.empty((T, K))
    for t in range(T):
        for k in range(K):
            gamma[t, k] = np.exp(la[t, k] + lb[t, k] - loglik)
        s = 0.0
        for k in range(K):
            s += gamma[t, k]
        for k in range(K):
            gamma[t, k] /= s
    xi = np.empty((max(T - 1, 0), K, K))
    for t in range(1, T):
        s = 0.0
        for j in range(K):
            for k in range(K):
                v = np.exp(la[t - 1, j] + log_P[j, k] + log_e[t, k] + lb[t, k] - loglik)
                xi[t - 1, j, k] = v
                s += v
        for j in range(K):
            for k in range(K):
                xi[t - 1, j, k] /= s
    return gamma, xi, loglik


def forward_backward(log_emissions, chain):
    """Smoothed state and transition posteriors plus the observed-data log-likelihood.

    ``log_emissions[t, k]`` is log f(y_t | S_t = k).  All recursions run in log
    space; the final renormalisation only removes rounding drift.
    """
    log_e = np.ascontiguousarray(log_emissions, dtype=float)
    if log_e.ndim != 2 or log_e.shape[0] < 1:
        raise ValueError("log_emissions must be a non-empty (T, K) matrix")
    if log_e.shape[1] != chain.K:
        raise ValueError(f"log_emissions has {log_e.shape[1]} columns, chain has {chain.K} states")
    bad = ~np.all(np.isfinite(log_e), axis=1)
    if bad.any():
        raise ValueError(f"non-finite log-emission rows at t = {np.flatnonzero(bad)[:10].tolist()}")
    gamma, xi, loglik = _forward_backward_log(log_e, _safe_log(chain.pi), _safe_log(chain.Pi))
    if not np.isfinite(loglik):
        raise FloatingPointError("observed sequence has zero probability under the chain")
    return Posteriors(gamma, xi, float(loglik))


def path_sum_loglik(log_emissions, chain, max_paths=10**6):
    """Exact log-likelihood by summing over all K**T state paths (testing oracle)."""
    log_e = np.asarray(log_emissions, dtype=float)
    T, K = log_e.shape
    if K ** T > max_paths:
        raise ValueError(f"{K}**{T} paths exceeds the enumeration guard {max_paths}")
    paths = np.array(list(itertools.product(range(K), repeat=T)), dtype=int)
    log_pi, log_P = _safe_log(chain.pi), _safe_log(chain.Pi)
    lp = log_pi[paths[:, 0]] + log_e[np.arange(T), paths].sum(axis=1)
    if T > 1:
        lp = lp + log_P[paths[:, :-1], paths[:, 1:]].sum(axis=1)
    return float(logsumexp(lp))
