"""Post-fit analytics: decoding, information criteria, ARI and parametric bootstrap."""
import itertools
import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import comb, xlogy

from .an import AnParams, an_sample
from .em import EhmmParams, FitConfig, fit
from .errors import EstimationError

log = logging.getLogger(__name__)


def decode(posteriors):
    """Posterior decoding: per-time argmax of gamma (first maximum on ties)."""
    gamma = getattr(posteriors, "gamma", posteriors)
    return np.argmax(np.asarray(gamma), axis=1)


def n_free_params(K, P):
    """Regression coefficients, scales, initial law and transition rows."""
    return K * P + K + (K - 1) + K * (K - 1)


def posterior_entropy(gamma):
    return float(-np.sum(xlogy(gamma, gamma))) + 0.0  # no negative zero


@dataclass(frozen=True)
class CriteriaRow:
    K: int
    tau: float
    loglik: float
    n_params: int
    aic: float
    bic: float
    icl: float
    entropy: float

    def to_dict(self):
        return dict(self.__dict__)


def information_criteria(result, T):
    """AIC, BIC and entropy-penalised ICL (BIC + 2 * posterior entropy) for a fit."""
    params = result.params
    p = n_free_params(params.K, params.P)
    ll = result.loglik
    aic = -2.0 * ll + 2.0 * p
    bic = -2.0 * ll + p * np.log(T)
    H = posterior_entropy(result.posteriors.gamma)
    return CriteriaRow(params.K, params.tau, ll, p, aic, bic, bic + 2.0 * H, H)


def select_states(data, config, Ks, taus):
    """Fit every (K, tau) pair; returns CriteriaRow list and the fits keyed by (K, tau)."""
    rows, fits = [], {}
    for tau in taus:
        for K in Ks:
            res = fit(data, replace(config, K=int(K), tau=float(tau)))
            fits[(int(K), float(tau))] = res
            rows.append(information_criteria(res, data.T))
    return rows, fits


def best_by(rows, criterion, tau=None):
    cand = [r for r in rows if tau is None or r.tau == tau]
    return min(cand, key=lambda r: getattr(r, criterion)).K


def adjusted_rand_index(a, b):
    """Hubert-Arabie adjusted Rand index from the contingency table."""
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.size != b.size:
        raise ValueError(f"label vectors differ in length: {a.size} vs {b.size}")
    if a.size < 2:
        raise ValueError("need at least two labels")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(table, (ai, bi), 1.0)
    index = comb(table, 2).sum()
    sum_a = comb(table.sum(axis=1), 2).sum()
    sum_b = comb(table.sum(axis=0), 2).sum()
    expected = sum_a * sum_b / comb(a.size, 2)
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        # both partitions trivial (all one cluster or all singletons)
        return 1.0 if index == max_index else 0.0
    return float((index - expected) / (max_index - expected))


def simulate_path(chain, T, rng):
    """Draw a state path of length T from a Markov chain."""
    states = np.empty(T, dtype=int)
    cum = np.cumsum(chain.Pi, axis=1)
    states[0] = min(np.searchsorted(np.cumsum(chain.pi), rng.random(), side="right"), chain.K - 1)
    u = rng.random(T)
    for t in range(1, T):
        states[t] = min(np.searchsorted(cum[states[t - 1]], u[t], side="right"), chain.K - 1)
    return states


def simulate_response(data, params, rng):
    """New response from the fitted model with the design held fixed."""
    states = simulate_path(params.chain, data.T, rng)
    mu = np.einsum("tp,tp->t", data.X, params.beta[states])
    y = np.empty(data.T)
    for k in range(params.K):
        idx = states == k
        y[idx] = an_sample(AnParams(0.0, params.sigma[k], params.tau), rng, idx.sum()) + mu[idx]
    return y, states


@dataclass(frozen=True)
class BootstrapReport:
    R: int
    estimate: EhmmParams
    se_beta: np.ndarray
    se_sigma: np.ndarray
    se_pi: np.ndarray
    se_Pi: np.ndarray
    converged: np.ndarray
    replicates: list = field(default_factory=list, repr=False)

    @property
    def n_converged(self):
        return int(np.sum(self.converged))

    def significant(self):
        """Coefficients whose magnitude exceeds two standard errors."""
        return np.abs(self.estimate.beta) > 2.0 * self.se_beta

    def to_dict(self):
        return {"R": self.R, "n_converged": self.n_converged, "estimate": self.estimate.to_dict(),
                "se": {"beta": self.se_beta.tolist(), "sigma": self.se_sigma.tolist(),
                       "pi": self.se_pi.tolist(), "Pi": self.se_Pi.tolist()},
                "significant_beta": self.significant().tolist(),
                "converged": self.converged.astype(bool).tolist()}


def match_states(params, reference):
    """Permutation of ``params`` states closest to ``reference`` in (beta, sigma)."""
    ref = np.column_stack([reference.beta, reference.sigma])
    cur = np.column_stack([params.beta, params.sigma])
    perms = itertools.permutations(range(params.K))
    return np.array(min(perms, key=lambda p: np.linalg.norm(cur[list(p)] - ref, axis=1).sum()))


def parametric_bootstrap(result, data, R, seed, config=None, align="distance"):
    """Bootstrap standard errors by simulating from the fit and refitting.

    Each replicate is refit with ``config`` warm-started at the original
    estimate.  Replicate states are matched to the original either by
    parameter distance (``align="distance"``) or by ascending scale
    (``align="sigma"``, the fit's own canonical order); the latter is
    ambiguous when states share a scale.  SEs use converged replicates only.
    """
    if align not in ("distance", "sigma"):
        raise ValueError(f"unknown alignment {align!r}")
    if R < 2:
        raise ValueError("need at least two bootstrap replicates")
    est = result.params
    cfg = replace(config or FitConfig(), K=est.K, tau=est.tau)
    ss = np.random.SeedSequence(seed)
    reps, ok = [], np.zeros(R, dtype=bool)
    for r, child in enumerate(ss.spawn(R)):
        sim_seed, fit_seed = child.spawn(2)
        y_star, _ = simulate_response(data, est, np.random.default_rng(sim_seed))
        try:
            res = fit(data.with_response(y_star), replace(cfg, seed=int(fit_seed.generate_state(1)[0])), init_params=[est])
        except EstimationError as exc:
            log.info("bootstrap replicate %d failed: %s", r, exc)
            continue
        ok[r] = res.converged
        p = res.params
        if align == "distance":
            p = p.permute(match_states(p, est))
        reps.append(p if res.converged else None)
    good = [p for p in reps if p is not None]
    if len(good) < R / 2:
        raise EstimationError(f"only {len(good)} of {R} bootstrap replicates converged")

    def sd(attr):
        return np.std(np.stack([getattr(p, attr) for p in good]), axis=0, ddof=1)

    return BootstrapReport(R, est, sd("beta"), sd("sigma"), sd("pi"), sd("Pi"), ok, good)
