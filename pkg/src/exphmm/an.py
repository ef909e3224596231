"""Asymmetric squared loss and the asymmetric normal (AN) working density.

The AN law with location ``mu``, scale ``sigma`` and level ``tau`` has
density proportional to ``exp(-w_tau((y - mu) / sigma))`` where
``w_tau(u) = u**2 * |tau - 1(u < 0)|``.  Its ``tau``-expectile is ``mu``.
"""
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq


def check_tau(tau):
    tau = float(tau)
    if not 0.0 < tau < 1.0:
        raise ValueError(f"expectile level tau must lie in (0, 1), got {tau}")
    return tau


@dataclass(frozen=True)
class AnParams:
    mu: float
    sigma: float
    tau: float

    def __post_init__(self):
        check_tau(self.tau)
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be positive and finite, got {self.sigma}")
        if not np.isfinite(self.mu):
            raise ValueError(f"mu must be finite, got {self.mu}")

    def logpdf(self, y):
        return an_logpdf(y, self.mu, self.sigma, self.tau)


def asymmetric_weight(u, tau):
    """|tau - 1(u < 0)|, elementwise."""
    return np.where(np.asarray(u) < 0, 1.0 - tau, tau)


def asymmetric_loss(u, tau):
    """Asymmetric squared loss ``u**2 * |tau - 1(u < 0)|``."""
    tau = check_tau(tau)
    u = np.asarray(u, dtype=float)
    out = u * u * asymmetric_weight(u, tau)
    return out if out.ndim else float(out)


def an_log_norm_const(sigma, tau):
    """Log of the AN normalising constant 2 sqrt(tau(1-tau)) / (sqrt(pi) sigma (sqrt(tau)+sqrt(1-tau)))."""
    return (np.log(2.0) + 0.5 * np.log(tau * (1.0 - tau)) - 0.5 * np.log(np.pi)
            - np.log(sigma) - np.log(np.sqrt(tau) + np.sqrt(1.0 - tau)))


def an_logpdf(y, mu, sigma, tau):
    """Log-density of AN(mu, sigma, tau) at ``y``.

    Vectorised over ``y`` and ``mu`` (and ``sigma`` when broadcastable).
    Evaluated in log space so extreme residuals never underflow.
    """
    tau = check_tau(tau)
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError("an_logpdf requires finite observations")
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma <= 0):
        raise ValueError("sigma must be positive")
    u = (y - mu) / sigma
    out = an_log_norm_const(sigma, tau) - u * u * asymmetric_weight(u, tau)
    return out if np.ndim(out) else float(out)


def an_pdf(y, mu, sigma, tau):
    return np.exp(an_logpdf(y, mu, sigma, tau))


def an_piece_scales(sigma, tau):
    """Standard deviations of the left and right normal halves."""
    return sigma / np.sqrt(2.0 * (1.0 - tau)), sigma / np.sqrt(2.0 * tau)


def an_sample(p, rng, size=None):
    """Draw from AN(p.mu, p.sigma, p.tau) as a two-piece normal.

    Each half is a half-normal with its own scale; a half is chosen with
    probability proportional to its mass, which is proportional to its scale.
    """
    left, right = an_piece_scales(p.sigma, p.tau)
    p_right = right / (left + right)
    z = np.abs(rng.standard_normal(size))
    go_right = rng.random(size) < p_right
    out = p.mu + np.where(go_right, right * z, -left * z)
    return out if np.ndim(out) else float(out)


def expectile_foc(values, m, tau):
    """sum |tau - 1(v < m)| (v - m); decreasing in m."""
    r = values - m
    return float(np.sum(asymmetric_weight(r, tau) * r))


def expectile_of_sample(values, tau, xtol=1e-10):
    """Empirical tau-expectile: the root of the asymmetric first-order condition."""
    tau = check_tau(tau)
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("expectile_of_sample needs at least one value")
    if not np.all(np.isfinite(v)):
        raise ValueError("expectile_of_sample needs finite values")
    lo, hi = v.min(), v.max()
    if lo == hi:
        return float(lo)
    # FOC is positive at min and negative at max
    tol = xtol * max(1.0, abs(lo), abs(hi))
    return float(brentq(lambda m: expectile_foc(v, m, tau), lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=500))
