"""Synthetic two-regime data and the Monte Carlo study runner.

The default design is a two-state chain with transition matrix
[[0.8, 0.2], [0.1, 0.9]], one standard normal covariate, and state-specific
regressions ``-1 + 2x`` and ``1 - 2x`` with Gaussian or skew-t errors.
"""
import itertools
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy import integrate, stats
from scipy.optimize import brentq
from scipy.special import gammaln

from .an import asymmetric_weight, check_tau
from .chain import ChainParams
from .em import FitConfig, TimeSeriesDataset, fit
from .errors import EstimationError
from .evaluation import adjusted_rand_index, decode, simulate_path

DESIGN_BETA = np.array([[-1.0, 2.0], [1.0, -2.0]])
DESIGN_PI = np.array([[0.8, 0.2], [0.1, 0.9]])
DESIGN_TAUS = (0.10, 0.25, 0.50, 0.75, 0.90)


@dataclass(frozen=True)
class Gaussian:
    scale: float = 1.0

    def pdf(self, x):
        return stats.norm.pdf(x, scale=self.scale)

    def sample(self, rng, size):
        return self.scale * rng.standard_normal(size)

    def mean(self):
        return 0.0

    def __str__(self):
        return "gaussian" if self.scale == 1.0 else f"gaussian(scale={self.scale:g})"


@dataclass(frozen=True)
class SkewT:
    """Azzalini skew-t with location 0, scale 1, ``df`` degrees of freedom and shape ``alpha``.

    Density ``2 t_df(x) T_{df+1}(alpha x sqrt((df+1)/(df+x^2)))``.
    """

    df: float = 5.0
    alpha: float = 2.0
    scale: float = 1.0

    def __post_init__(self):
        if not self.df > 2:
            raise ValueError("skew-t errors need df > 2 for a finite variance")

    def pdf(self, x):
        z = np.asarray(x, dtype=float) / self.scale
        arg = self.alpha * z * np.sqrt((self.df + 1.0) / (self.df + z * z))
        return 2.0 * stats.t.pdf(z, self.df) * stats.t.cdf(arg, self.df + 1.0) / self.scale

    def sample(self, rng, size):
        delta = self.alpha / np.sqrt(1.0 + self.alpha ** 2)
        z = delta * np.abs(rng.standard_normal(size)) + np.sqrt(1.0 - delta ** 2) * rng.standard_normal(size)
        w = rng.chisquare(self.df, size) / self.df
        return self.scale * z / np.sqrt(w)

    def mean(self):
        delta = self.alpha / np.sqrt(1.0 + self.alpha ** 2)
        nu = self.df
        return self.scale * delta * np.sqrt(nu / np.pi) * np.exp(gammaln((nu - 1) / 2) - gammaln(nu / 2))

    def __str__(self):
        return f"skew_t(df={self.df:g}, alpha={self.alpha:g})"


def error_law(kind, scale=1.0):
    if kind == "gaussian":
        return Gaussian(scale)
    if kind in ("skewt", "skew_t"):
        return SkewT(5.0, 2.0, scale)
    raise ValueError(f"unknown error law {kind!r}")


@dataclass(frozen=True)
class DgpSpec:
    beta_true: np.ndarray = field(default_factory=lambda: DESIGN_BETA.copy())
    Pi_true: np.ndarray = field(default_factory=lambda: DESIGN_PI.copy())
    pi_true: np.ndarray | None = None
    errors: Gaussian | SkewT = field(default_factory=Gaussian)
    T: int = 500

    def __post_init__(self):
        beta = np.atleast_2d(np.asarray(self.beta_true, dtype=float))
        K = beta.shape[0]
        pi = stationary_distribution(self.Pi_true) if self.pi_true is None else self.pi_true
        ChainParams(np.asarray(pi, dtype=float), np.asarray(self.Pi_true, dtype=float))
        object.__setattr__(self, "beta_true", beta)
        object.__setattr__(self, "pi_true", np.asarray(pi, dtype=float))
        if self.pi_true.size != K:
            raise ValueError("chain and coefficients disagree on K")

    @property
    def K(self):
        return self.beta_true.shape[0]

    @property
    def P(self):
        return self.beta_true.shape[1]

    @property
    def chain(self):
        return ChainParams(self.pi_true, np.asarray(self.Pi_true, dtype=float))

    def with_T(self, T):
        return DgpSpec(self.beta_true, self.Pi_true, self.pi_true, self.errors, T)


def two_state_spec(kind="gaussian", T=500):
    """The two-state design with either error law."""
    return DgpSpec(errors=error_law(kind), T=T)


def stationary_distribution(Pi):
    Pi = np.asarray(Pi, dtype=float)
    K = Pi.shape[0]
    A = np.vstack([Pi.T - np.eye(K), np.ones(K)])
    b = np.zeros(K + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def simulate_dgp(spec, rng):
    """Simulate (dataset, true states) from the design."""
    states = simulate_path(spec.chain, spec.T, rng)
    X = np.column_stack([np.ones(spec.T), rng.standard_normal((spec.T, spec.P - 1))])
    eps = spec.errors.sample(rng, spec.T)
    y = np.einsum("tp,tp->t", X, spec.beta_true[states]) + eps
    names = ("intercept", "x") if spec.P == 2 else ("intercept",) + tuple(f"x{p}" for p in range(1, spec.P))
    return TimeSeriesDataset(y, X, names=names), states


def _population_foc(pdf, m, tau):
    """tau E[(Y-m)+] - (1-tau) E[(m-Y)+] by quadrature."""
    upper, _ = integrate.quad(lambda y: (y - m) * pdf(y), m, np.inf, epsabs=1e-13, epsrel=1e-12, limit=200)
    lower, _ = integrate.quad(lambda y: (m - y) * pdf(y), -np.inf, m, epsabs=1e-13, epsrel=1e-12, limit=200)
    return tau * upper - (1.0 - tau) * lower


def population_expectile(pdf, tau, bracket=(-50.0, 50.0)):
    """tau-expectile of a density by root-finding on the integrated first-order condition."""
    tau = check_tau(tau)
    return float(brentq(lambda m: _population_foc(pdf, m, tau), *bracket, xtol=1e-12))


@lru_cache(maxsize=256)
def _shift(law, tau):
    return population_expectile(law.pdf, tau)


def true_expectile_shift(errors, tau):
    """tau-expectile of the error law; the intercept offset of the level-tau model."""
    if isinstance(errors, str):
        errors = error_law(errors)
    return _shift(errors, float(tau))


def true_coefficients(spec, tau):
    beta = spec.beta_true.copy()
    beta[:, 0] += true_expectile_shift(spec.errors, tau)
    return beta


def align_to_truth(beta_hat, beta_true):
    """State permutation minimising the summed Euclidean distance to the true coefficients."""
    K = beta_true.shape[0]
    best = min(itertools.permutations(range(K)),
               key=lambda p: np.linalg.norm(beta_hat[list(p)] - beta_true, axis=1).sum())
    return np.array(best)


@dataclass
class McReport:
    """Monte Carlo results.

    ``estimates`` has shape (n_reps, n_taus, K, P) with NaN for failed fits;
    ``ari`` has shape (n_reps, n_taus).
    """

    spec_label: str
    T: int
    taus: tuple
    truth: np.ndarray
    estimates: np.ndarray
    ari: np.ndarray
    failures: np.ndarray

    @property
    def n_replications(self):
        return self.estimates.shape[0]

    @property
    def bias(self):
        return np.nanmean(self.estimates, axis=0) - self.truth

    @property
    def std(self):
        return np.nanstd(self.estimates, axis=0, ddof=1)

    def median_ari(self):
        return np.nanmedian(self.ari, axis=0)

    def table_rows(self):
        """Long-format rows: one per (tau, state, coefficient)."""
        bias, std = self.bias, self.std
        rows = []
        for i, tau in enumerate(self.taus):
            for k in range(self.truth.shape[1]):
                for p in range(self.truth.shape[2]):
                    rows.append({"tau": tau, "state": k + 1, "coef": p + 1,
                                 "truth": float(self.truth[i, k, p]),
                                 "bias": float(bias[i, k, p]), "std": float(std[i, k, p])})
        return rows

    def to_dict(self):
        return {"errors": self.spec_label, "T": self.T, "taus": list(self.taus),
                "n_replications": self.n_replications,
                "failures": self.failures.tolist(),
                "table": self.table_rows(),
                "median_ari": self.median_ari().tolist(),
                "ari": np.where(np.isnan(self.ari), None, self.ari).tolist()}


def run_mc_study(spec, taus=DESIGN_TAUS, n_reps=100, fit_config=None, seed=0):
    """Simulate ``n_reps`` datasets, fit at every tau, and collect errors and ARIs.

    Replication r draws its data and start seeds from the r-th child of
    ``SeedSequence(seed)``, so results do not depend on execution order.
    """
    if n_reps < 2:
        raise ValueError("need at least two replications")
    fit_config = fit_config or FitConfig(K=spec.K)
    taus = tuple(float(t) for t in taus)
    truth = np.stack([true_coefficients(spec, tau) for tau in taus])
    est = np.full((n_reps, len(taus), spec.K, spec.P), np.nan)
    ari = np.full((n_reps, len(taus)), np.nan)
    failures = np.zeros(len(taus), dtype=int)
    for r, child in enumerate(np.random.SeedSequence(seed).spawn(n_reps)):
        data_seed, fit_seed = child.spawn(2)
        data, states = simulate_dgp(spec, np.random.default_rng(data_seed))
        start_seed = int(fit_seed.generate_state(1)[0])
        for i, tau in enumerate(taus):
            cfg = replace(fit_config, K=spec.K, tau=tau, seed=start_seed)
            try:
                res = fit(data, cfg)
            except EstimationError:
                failures[i] += 1
                continue
            order = align_to_truth(res.params.beta, truth[i])
            est[r, i] = res.params.beta[order]
            ari[r, i] = adjusted_rand_index(decode(res.posteriors), states)
    return McReport(str(spec.errors), spec.T, taus, truth, est, ari, failures)
