"""Entropies of Gaussian and max-bounded (truncated) predictive distributions.

The acquisition needs three differential entropies:

* a plain Gaussian (closed form);
* a Gaussian truncated at f <= f_star (closed form);
* the fidelity-m marginal after bounding the top-fidelity value at the same
  input, whose density is

      p(f) = Phi((f_star - u(f)) / s) * N(f | mu_m, var_m) / Phi(gamma_star)

  with u(f) the usual bivariate-normal conditional mean and s^2 its variance.

For the third case the entropy integral is split exactly into closed-form
Gaussian integrals plus one residual term E_p[log Phi(.)] whose integrand
vanishes outside the sigmoid transition; only that term is quadratured, with
nodes placed on the transition window.  Observation noise is handled by the
same core with the fidelity-m variance inflated by the noise variance.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import log_ndtr

from .errors import InputError

__all__ = [
    "QuadratureSpec",
    "integrate_1d",
    "gaussian_entropy",
    "gaussian_entropy_noisy",
    "truncnorm_entropy",
    "EntropyInputs",
    "cross_fidelity_entropy",
    "cross_fidelity_entropy_noisy",
    "cross_fidelity_density",
    "bounded_entropy_core",
]

_LOG_2PI = np.log(2.0 * np.pi)
_LOG_2PIE = _LOG_2PI + 1.0
# Relative threshold below which the residual conditional variance is treated
# as zero and the exact step-function limit is used.
_DEGENERATE_REL = 1e-12
# Width ratio beyond which the sigmoid is effectively constant over the
# density's support.
_FLAT_WIDTH = 1e8


@dataclass(frozen=True)
class QuadratureSpec:
    """Deterministic composite Gauss-Legendre rule.

    n_nodes : total node count (>= 16), split into panels of at most 32;
    halfwidth_sigmas : integration half-range in posterior standard
    deviations (>= 4).
    """

    n_nodes: int = 64
    halfwidth_sigmas: float = 8.0
    scheme: str = "gauss-legendre"

    def __post_init__(self):
        if self.scheme != "gauss-legendre":
            raise InputError(f"unknown quadrature scheme {self.scheme!r}")
        if int(self.n_nodes) < 16:
            raise InputError("n_nodes must be >= 16")
        if not self.halfwidth_sigmas >= 4:
            raise InputError("halfwidth_sigmas must be >= 4")
        object.__setattr__(self, "n_nodes", int(self.n_nodes))
        object.__setattr__(self, "halfwidth_sigmas", float(self.halfwidth_sigmas))


@lru_cache(maxsize=32)
def _composite_rule(n_nodes):
    """Nodes/weights of a composite Gauss-Legendre rule on [-1, 1]."""
    n_panels = max(1, -(-n_nodes // 32))
    base = n_nodes // n_panels
    extra = n_nodes % n_panels
    edges = np.linspace(-1.0, 1.0, n_panels + 1)
    nodes, weights = [], []
    for i in range(n_panels):
        k = base + (1 if i < extra else 0)
        t, u = np.polynomial.legendre.leggauss(k)
        a, b = edges[i], edges[i + 1]
        nodes.append(0.5 * (b - a) * t + 0.5 * (a + b))
        weights.append(0.5 * (b - a) * u)
    return np.concatenate(nodes), np.concatenate(weights)


def integrate_1d(f, center, halfwidth, quad=QuadratureSpec()):
    """Composite Gauss-Legendre integral of f over [center-h, center+h]."""
    if not (np.isfinite(center) and np.isfinite(halfwidth) and halfwidth > 0):
        raise InputError("center must be finite and halfwidth positive")
    t, u = _composite_rule(quad.n_nodes)
    x = center + halfwidth * t
    vals = np.asarray(f(x), dtype=float)
    if vals.shape != x.shape:
        raise InputError("integrand must be vectorized, returning one value per node")
    if not np.all(np.isfinite(vals)):
        bad = x[~np.isfinite(vals)][0]
        raise InputError(f"integrand non-finite at node {bad!r}")
    return float(halfwidth * np.sum(u * vals))


# -- closed forms ------------------------------------------------------------


def gaussian_entropy(sigma):
    """Entropy of N(mu, sigma^2): log(sigma * sqrt(2*pi*e))."""
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma <= 0):
        raise InputError("sigma must be positive")
    out = np.log(sigma) + 0.5 * _LOG_2PIE
    return float(out) if out.ndim == 0 else out


def gaussian_entropy_noisy(variance, noise_variance):
    """Entropy of the noisy observation y = f + eps: 0.5 log(2*pi*e*(v + vn))."""
    total = np.asarray(variance, dtype=float) + float(noise_variance)
    if np.any(total <= 0):
        raise InputError("variance + noise_variance must be positive")
    out = 0.5 * (_LOG_2PIE + np.log(total))
    return float(out) if out.ndim == 0 else out


def _norm_logpdf(z):
    return -0.5 * (z * z + _LOG_2PI)


def _std_truncnorm_entropy(gamma):
    """Entropy of a standard normal truncated to z <= gamma (vectorized)."""
    gamma = np.asarray(gamma, dtype=float)
    log_phi = log_ndtr(gamma)
    # pdf/cdf ratio computed in log space; stable for deeply negative gamma.
    mills = np.exp(_norm_logpdf(gamma) - log_phi)
    return 0.5 * _LOG_2PIE + log_phi - 0.5 * gamma * mills


def truncnorm_entropy(mu, sigma, f_star):
    """Entropy of N(mu, sigma^2) truncated to f <= f_star (closed form)."""
    if not sigma > 0:
        raise InputError("sigma must be positive")
    gamma = (float(f_star) - float(mu)) / float(sigma)
    return float(np.log(sigma) + _std_truncnorm_entropy(gamma))


# -- max-bounded cross-fidelity entropy ---------------------------------------


@dataclass(frozen=True)
class EntropyInputs:
    """Joint moments of (f^(m), f^(M)) at one input plus the max bound f_star."""

    mu_m: float
    var_m: float
    mu_M: float
    var_M: float
    cov_mM: float
    f_star: float
    noise_variance: float = 0.0

    def __post_init__(self):
        if not (self.var_m > 0 and self.var_M > 0):
            raise InputError("variances must be positive")
        if self.cov_mM**2 > self.var_m * self.var_M * (1 + 1e-12):
            raise InputError("cov_mM violates the Cauchy-Schwarz bound")
        if self.noise_variance < 0:
            raise InputError("noise_variance must be >= 0")


def bounded_entropy_core(delta, var_eff, var_M, cov, quad=QuadratureSpec()):
    """Entropy of the max-bounded fidelity-m marginal, vectorized.

    Parameters broadcast together: delta = f_star - mu_M, var_eff the
    (possibly noise-inflated) fidelity-m variance, var_M the top-fidelity
    variance, cov their covariance.  Works in the standardized variable
    z = (f - mu_m)/sqrt(var_eff); the returned entropy includes the
    log sqrt(var_eff) scale term.

    Decomposition: with A(z) = Phi((delta - beta z)/s), beta = cov/sigma,
    s^2 = var_M - cov^2/var_eff, the density is q(z) = A(z) phi(z)/Phi(g*),
    g* = delta/sigma_M, and

        H = 0.5 log(2 pi e var_eff) + log Phi(g*)
            - rho^2 g* phi(g*) / (2 Phi(g*)) - E_q[log A(z)]

    using exact Gaussian integrals of z^k A(z) phi(z).  Only E_q[log A] is
    quadratured.  Its integrand needs both q and log A non-negligible, so the
    nodes cover the intersection of the sigmoid transition zone
    z0 +- R*w (z0 = delta/beta, w = s/|beta|) with the density's support zone
    |z| <= max(R, |g*| + 6); an empty intersection means the sigmoid is
    saturated at 1 over the density and the term vanishes.  As s -> 0 the
    window collapses, E_q[log A] -> 0, and the expression reduces exactly to
    the truncated-normal entropy.
    """
    delta, var_eff, var_M, cov = np.broadcast_arrays(
        np.asarray(delta, dtype=float),
        np.asarray(var_eff, dtype=float),
        np.asarray(var_M, dtype=float),
        np.asarray(cov, dtype=float),
    )
    shape = delta.shape
    delta = np.atleast_1d(delta).ravel()
    var_eff = np.atleast_1d(var_eff).ravel()
    var_M = np.atleast_1d(var_M).ravel()
    cov = np.atleast_1d(cov).ravel()
    sigma = np.sqrt(var_eff)
    sigma_M = np.sqrt(var_M)
    gamma = delta / sigma_M
    log_phi_star = log_ndtr(gamma)
    mills = np.exp(_norm_logpdf(gamma) - log_phi_star)
    rho2 = np.clip(cov * cov / (var_eff * var_M), 0.0, 1.0)
    analytic = (
        0.5 * (_LOG_2PIE + np.log(var_eff))
        + log_phi_star
        - 0.5 * rho2 * gamma * mills
    )

    s2 = var_M - cov * cov / var_eff
    degenerate = s2 <= _DEGENERATE_REL * var_M
    s = np.sqrt(np.where(degenerate, 1.0, np.maximum(s2, 0.0)))
    beta = cov / sigma
    abs_beta = np.abs(beta)
    flat = (~degenerate) & (abs_beta * _FLAT_WIDTH <= s)
    regular = ~(degenerate | flat)

    residual = np.zeros_like(delta)
    # Flat sigmoid: A is constant over the density's support, E_q[log A] is
    # its log value.
    residual[flat] = log_ndtr(delta[flat] / s[flat])

    if np.any(regular):
        R = quad.halfwidth_sigmas
        t, u = _composite_rule(quad.n_nodes)
        beta_r = beta[regular]
        s_r = s[regular]
        delta_r = delta[regular]
        w = s_r / np.abs(beta_r)
        z0 = delta_r / beta_r
        Z = np.maximum(R, np.abs(gamma[regular]) + 6.0)
        lo = np.maximum(z0 - R * w, -Z)
        hi = np.minimum(z0 + R * w, Z)
        halfw = np.maximum(0.5 * (hi - lo), 0.0)
        center = 0.5 * (hi + lo)
        z = center[..., None] + halfw[..., None] * t
        logA = log_ndtr((delta_r[..., None] - beta_r[..., None] * z) / s_r[..., None])
        logq = logA + _norm_logpdf(z) - log_phi_star[regular][..., None]
        # exp underflows to 0 well before logq * exp(logq) matters.
        contrib = np.where(logq > -700.0, np.exp(logq) * logA, 0.0)
        residual[regular] = halfw * np.sum(u * contrib, axis=-1)

    return (analytic - residual).reshape(shape)


def _inputs_core(inputs, quad, noise_variance):
    var_eff = inputs.var_m + noise_variance
    out = bounded_entropy_core(
        inputs.f_star - inputs.mu_M, var_eff, inputs.var_M, inputs.cov_mM, quad
    )
    return float(out)


def cross_fidelity_entropy(inputs, quad=QuadratureSpec()):
    """Entropy of f^(m) given f^(M) <= f_star at the same input (noiseless)."""
    return _inputs_core(inputs, quad, 0.0)


def cross_fidelity_entropy_noisy(inputs, quad=QuadratureSpec()):
    """Entropy of the noisy observation y^(m) given f^(M) <= f_star."""
    return _inputs_core(inputs, quad, inputs.noise_variance)


def cross_fidelity_density(inputs, f):
    """Density of f^(m) given f^(M) <= f_star, evaluated at f (noiseless).

    Exposed so tests can integrate the density with an independent rule.
    """
    f = np.asarray(f, dtype=float)
    sigma = np.sqrt(inputs.var_m)
    sigma_M = np.sqrt(inputs.var_M)
    z = (f - inputs.mu_m) / sigma
    delta = inputs.f_star - inputs.mu_M
    log_phi_star = log_ndtr(delta / sigma_M)
    s2 = inputs.var_M - inputs.cov_mM**2 / inputs.var_m
    beta = inputs.cov_mM / sigma
    arg = delta - beta * z
    if s2 <= _DEGENERATE_REL * inputs.var_M:
        # Perfect correlation: the bound is a hard threshold on f^(m).
        logA = np.where(arg >= 0, 0.0, -np.inf)
    else:
        logA = log_ndtr(arg / np.sqrt(s2))
    logq = logA + _norm_logpdf(z) - log_phi_star
    out = np.where(np.isneginf(logA), 0.0, np.exp(logq) / sigma)
    return out
