"""EM estimation of the expectile hidden Markov regression model.

Each state k carries a linear expectile model ``mu_tk = x_t' beta_k`` with an
asymmetric normal working density of scale ``sigma_k``; the latent states
follow a homogeneous first-order Markov chain.
"""
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .an import an_log_norm_const, asymmetric_weight, check_tau
from .chain import ChainParams, Posteriors, forward_backward
from .errors import DataError, EstimationError

log = logging.getLogger(__name__)

MAX_INIT_ATTEMPTS = 100


@dataclass(frozen=True)
class TimeSeriesDataset:
    """Response ``y`` (T,) and design ``X`` (T, P) whose first column is the intercept."""

    y: np.ndarray
    X: np.ndarray
    dates: tuple | None = None
    names: tuple | None = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[0] != y.size:
            raise DataError(f"X has {X.shape[0]} rows but y has {y.size} entries")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
            raise DataError("y and X must be finite")
        if y.size <= X.shape[1]:
            raise DataError(f"need T > P, got T={y.size}, P={X.shape[1]}")
        if not np.all(X[:, 0] == 1.0):
            raise DataError("first column of X must be the intercept (all ones)")
        if self.dates is not None and len(self.dates) != y.size:
            raise DataError("dates must have one label per observation")
        if self.names is not None and len(self.names) != X.shape[1]:
            raise DataError("names must label every column of X")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", np.ascontiguousarray(X))

    @classmethod
    def from_covariates(cls, y, covariates, dates=None, names=None):
        """Build a dataset by prepending an intercept column to ``covariates``."""
        Z = np.asarray(covariates, dtype=float)
        if Z.ndim == 1:
            Z = Z[:, None]
        X = np.column_stack([np.ones(Z.shape[0]), Z])
        if names is not None:
            names = ("intercept", *names)
        return cls(y, X, None if dates is None else tuple(dates), names)

    @property
    def T(self):
        return self.y.size

    @property
    def P(self):
        return self.X.shape[1]

    def with_response(self, y):
        return replace(self, y=np.asarray(y, dtype=float))


@dataclass(frozen=True)
class FitConfig:
    K: int = 2
    tau: float = 0.5
    em_tolerance: float = 1e-4
    max_em_iterations: int = 1000
    irls_tolerance: float = 1e-8
    max_irls_iterations: int = 50
    n_starts: int = 20
    seed: int = 0
    scale_floor: float = 1e-8

    def __post_init__(self):
        check_tau(self.tau)
        if int(self.K) < 1:
            raise ValueError("K must be at least 1")
        if int(self.n_starts) < 1:
            raise ValueError("n_starts must be at least 1")
        for name in ("em_tolerance", "irls_tolerance", "scale_floor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("max_em_iterations", "max_irls_iterations"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class EhmmParams:
    beta: np.ndarray
    sigma: np.ndarray
    chain: ChainParams
    tau: float

    def __post_init__(self):
        beta = np.atleast_2d(np.asarray(self.beta, dtype=float))
        sigma = np.atleast_1d(np.asarray(self.sigma, dtype=float))
        check_tau(self.tau)
        if sigma.shape != (beta.shape[0],) or self.chain.K != beta.shape[0]:
            raise ValueError("beta, sigma and chain disagree on the number of states")
        if not np.all(sigma > 0):
            raise ValueError("state scales must be positive")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "sigma", sigma)

    @property
    def K(self):
        return self.beta.shape[0]

    @property
    def P(self):
        return self.beta.shape[1]

    @property
    def pi(self):
        return self.chain.pi

    @property
    def Pi(self):
        return self.chain.Pi

    def permute(self, order):
        order = np.asarray(order)
        return EhmmParams(self.beta[order], self.sigma[order], self.chain.permute(order), self.tau)

    def to_dict(self):
        return {"tau": self.tau, "beta": self.beta.tolist(), "sigma": self.sigma.tolist(),
                "pi": self.pi.tolist(), "Pi": self.Pi.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["beta"]), np.array(d["sigma"]),
                   ChainParams(np.array(d["pi"]), np.array(d["Pi"])), float(d["tau"]))


@dataclass(frozen=True)
class FitResult:
    """Output of an EM run.

    ``posteriors`` are evaluated at ``params``.  ``mstep_gamma`` holds the
    smoothed probabilities that produced ``params`` in the last M-step, so the
    coefficient first-order conditions can be checked against them.
    """

    params: EhmmParams
    posteriors: Posteriors
    loglik: float
    n_iterations: int
    converged: bool
    start_index: int
    loglik_trace: np.ndarray
    mstep_gamma: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    def permute(self, order):
        order = np.asarray(order)
        return replace(
            self,
            params=self.params.permute(order),
            posteriors=self.posteriors.permute(order),
            mstep_gamma=None if self.mstep_gamma is None else self.mstep_gamma[:, order],
        )

    def canonical(self):
        """Relabel states by ascending scale."""
        return self.permute(np.argsort(self.params.sigma, kind="stable"))


def _transition_matrix(labels, K):
    counts = np.zeros((K, K))
    np.add.at(counts, (labels[:-1], labels[1:]), 1.0)
    rows = counts.sum(axis=1, keepdims=True)
    return np.where(rows > 0, counts / np.where(rows > 0, rows, 1.0), 1.0 / K)


def params_from_labels(data, labels, K, tau, scale_floor=1e-8):
    """Starting values from a hard partition: per-state OLS and empirical chain frequencies."""
    labels = np.asarray(labels, dtype=int)
    beta = np.empty((K, data.P))
    sigma = np.empty(K)
    for k in range(K):
        idx = labels == k
        Xk, yk = data.X[idx], data.y[idx]
        beta[k], *_ = np.linalg.lstsq(Xk, yk, rcond=None)
        resid = yk - Xk @ beta[k]
        sigma[k] = max(np.sqrt(np.mean(resid ** 2)), scale_floor)
    pi = np.bincount(labels, minlength=K) / labels.size
    return EhmmParams(beta, sigma, ChainParams(pi, _transition_matrix(labels, K)), tau)


def init_random(data, config, rng):
    """Random-partition initialisation with uniform multinomial labels."""
    K = config.K
    for _ in range(MAX_INIT_ATTEMPTS):
        labels = rng.integers(0, K, size=data.T)
        counts = np.bincount(labels, minlength=K)
        if counts.min() > data.P:
            return params_from_labels(data, labels, K, config.tau, config.scale_floor)
    raise EstimationError(
        f"could not draw a partition with more than P={data.P} points per state "
        f"in {MAX_INIT_ATTEMPTS} attempts (T={data.T}, K={K})")


def log_emissions(data, params):
    """(T, K) matrix of AN log-densities with location X @ beta_k."""
    mu = data.X @ params.beta.T
    u = (data.y[:, None] - mu) / params.sigma
    return an_log_norm_const(params.sigma, params.tau) - u * u * asymmetric_weight(u, params.tau)


def e_step(data, params):
    return forward_backward(log_emissions(data, params), params.chain)


def m_step_chain(posteriors, diagnostics=None):
    """Initial law from gamma at t = 1 and transitions from summed pairwise posteriors."""
    gamma, xi = posteriors.gamma, posteriors.xi
    K = gamma.shape[1]
    pi = gamma[0] / gamma[0].sum()
    if xi.shape[0] == 0:
        return ChainParams(pi, np.eye(K))
    counts = xi.sum(axis=0)
    rows = counts.sum(axis=1)
    empty = rows <= 0
    Pi = np.empty((K, K))
    Pi[~empty] = counts[~empty] / rows[~empty, None]
    Pi[empty] = 1.0 / K
    # exact renormalisation keeps rows stochastic to machine precision
    Pi /= Pi.sum(axis=1, keepdims=True)
    if empty.any() and diagnostics is not None:
        diagnostics.setdefault("uniform_transition_rows", []).extend(np.flatnonzero(empty).tolist())
    return ChainParams(pi, Pi)


def beta_gradient(data, weights, beta, tau):
    """sum_t w_t |tau - 1(y_t < x_t'beta)| x_t (y_t - x_t'beta)."""
    r = data.y - data.X @ beta
    return data.X.T @ (weights * asymmetric_weight(r, tau) * r)


def m_step_beta(data, weights, beta_init, tau, config, state=None):
    """Weighted asymmetric least squares by IRLS.

    Iterates the weighted normal equations with weights
    ``gamma_t * |tau - 1(y_t < x_t'beta)|`` until the coefficient change is
    below ``config.irls_tolerance``.
    """
    X, y = data.X, data.y
    beta = np.asarray(beta_init, dtype=float).copy()
    n_iter = 1 if tau == 0.5 else config.max_irls_iterations
    for it in range(n_iter):
        w = weights * asymmetric_weight(y - X @ beta, tau)
        Xw = X * w[:, None]
        try:
            new = np.linalg.solve(Xw.T @ X, Xw.T @ y)
        except np.linalg.LinAlgError:
            new = None
        if new is None or not np.all(np.isfinite(new)):
            raise EstimationError(f"singular weighted Gram matrix for state {state} at IRLS iteration {it}")
        step = np.max(np.abs(new - beta))
        beta = new
        if step < config.irls_tolerance:
            break
    return beta


def m_step_sigma(data, weights, beta, tau, scale_floor=1e-8):
    """Scale update: sigma^2 = 2 sum w |tau - 1(r<0)| r^2 / sum w, floored at ``scale_floor``."""
    r = data.y - data.X @ beta
    s2 = 2.0 * np.sum(weights * asymmetric_weight(r, tau) * r * r) / np.sum(weights)
    return max(float(np.sqrt(s2)), scale_floor)


def m_step(data, posteriors, params, config, diagnostics=None):
    chain = m_step_chain(posteriors, diagnostics)
    beta = np.empty_like(params.beta)
    sigma = np.empty(params.K)
    for k in range(params.K):
        w = posteriors.gamma[:, k]
        mass = w.sum()
        if mass < data.P + 1:
            raise EstimationError(f"state {k} has effective sample size {mass:.3g} < P+1 = {data.P + 1}")
        beta[k] = m_step_beta(data, w, params.beta[k], params.tau, config, state=k)
        sigma[k] = m_step_sigma(data, w, beta[k], params.tau, config.scale_floor)
        if sigma[k] <= config.scale_floor and diagnostics is not None:
            diagnostics["scale_floor_hit"] = True
    return EhmmParams(beta, sigma, chain, params.tau)


def run_em(data, params, config, start_index=0):
    """Single EM run from ``params``; returns a canonically ordered FitResult.

    Stops when the absolute change of the observed working log-likelihood
    between two consecutive E-steps falls below ``config.em_tolerance``.
    """
    if params.P != data.P:
        raise ValueError(f"params have P={params.P}, data have P={data.P}")
    diagnostics = {}
    trace = []
    mstep_gamma = None
    converged = False
    n_iter = 0
    while True:
        post = e_step(data, params)
        trace.append(post.loglik)
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) < config.em_tolerance:
            converged = True
            break
        if n_iter >= config.max_em_iterations:
            break
        params = m_step(data, post, params, config, diagnostics)
        mstep_gamma = post.gamma
        n_iter += 1
    trace = np.array(trace)
    if np.any(np.diff(trace) < -1e-8):
        diagnostics["loglik_decrease"] = float(np.min(np.diff(trace)))
    res = FitResult(params, post, float(trace[-1]), n_iter, converged, start_index, trace,
                    mstep_gamma, diagnostics)
    return res.canonical()


def start_streams(seed, n):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def fit(data, config, init_params=()):
    """Multi-start EM; keeps the run with the largest final log-likelihood.

    ``init_params`` are extra warm starts tried before the ``config.n_starts``
    random-partition starts.
    """
    if config.K > 1 and data.T < config.K * (data.P + 1):
        raise DataError(f"T={data.T} too small for K={config.K} states with P={data.P}")
    starts = [(lambda p=p: p) for p in init_params]
    starts += [(lambda rng=rng: init_random(data, config, rng)) for rng in start_streams(config.seed, config.n_starts)]
    best, failures, logliks = None, [], []
    for i, make in enumerate(starts):
        try:
            res = run_em(data, make(), config, start_index=i)
        except (EstimationError, FloatingPointError, ValueError) as exc:
            failures.append((i, str(exc)))
            logliks.append(np.nan)
            log.debug("start %d failed: %s", i, exc)
            continue
        logliks.append(res.loglik)
        if best is None or res.loglik > best.loglik:
            best = res
    if best is None:
        raise EstimationError("all EM starts failed: " + "; ".join(f"start {i}: {m}" for i, m in failures))
    diagnostics = dict(best.diagnostics, start_logliks=logliks, failed_starts=failures)
    return replace(best, diagnostics=diagnostics)
