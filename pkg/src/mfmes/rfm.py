"""Random feature maps for exact posterior function sampling.

Each unit-variance ARD Gaussian latent is approximated by D trigonometric
features with frequencies from its spectral density; the latent-factor mixing
is folded in through the Cholesky factor L_c of w_c w_c^T + diag(kappa_c), so

    phi(x, m)[c-block] = stack_j( L_c[m-1, j] * sqrt(2/D) cos(Omega_c x + b_c) )

has phi(x,m) . phi(x',m') ~= k((x,m), (x',m')).  A Bayesian linear model on
these features then yields joint function samples across all inputs and
fidelities from a single weight draw, which is what couples the sampled max
value f* with sampled pending values f_Q.

Posterior weights are N(A^{-1} Phi^T y, sigma_n^2 A^{-1}), A = Phi^T Phi +
sigma_n^2 I.  When n < D_total the samples are drawn through the exact
n-dimensional dual form (Matheron update) instead of factoring A.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import log_ndtr

from .errors import InputError
from .gp import chol_with_jitter
from .validation import check_fidelities, check_points

__all__ = [
    "RfmFeatureMap",
    "WeightSample",
    "build_feature_map",
    "sample_posterior_weights",
    "sample_max_value",
    "sample_pending_values",
    "GumbelFit",
    "fit_gumbel_max",
    "sample_max_values_gumbel",
]


@dataclass(frozen=True)
class RfmFeatureMap:
    """Frozen random features for a fixed set of kernel hyperparameters."""

    params: object               # SlfmHyperparams
    frequencies: np.ndarray      # (C, D, d)
    phases: np.ndarray           # (C, D)
    mixing_chol: np.ndarray      # (C, M, M), lower triangular

    @property
    def n_bases(self):
        return self.frequencies.shape[1]

    @property
    def n_features(self):
        C, D, _ = self.frequencies.shape
        return C * self.params.n_fidelities * D

    def features(self, x, m):
        """Feature matrix for rows of x at fidelity m, shape (n, C*M*D)."""
        x = check_points(x, d=self.params.n_dims)
        m = int(m)
        check_fidelities(m, n_fidelities=self.params.n_fidelities)
        C, D, _ = self.frequencies.shape
        M = self.params.n_fidelities
        out = np.empty((x.shape[0], C * M * D))
        scale = np.sqrt(2.0 / D)
        for c in range(C):
            phi = scale * np.cos(x @ self.frequencies[c].T + self.phases[c])
            L = self.mixing_chol[c]
            block = out[:, c * M * D : (c + 1) * M * D]
            for j in range(M):
                block[:, j * D : (j + 1) * D] = L[m - 1, j] * phi
        return out

    def features_rows(self, x, m):
        """Feature matrix with a per-row fidelity vector."""
        x = check_points(x, d=self.params.n_dims)
        m = check_fidelities(m, n=x.shape[0], n_fidelities=self.params.n_fidelities)
        C, D, _ = self.frequencies.shape
        M = self.params.n_fidelities
        out = np.empty((x.shape[0], C * M * D))
        scale = np.sqrt(2.0 / D)
        for c in range(C):
            phi = scale * np.cos(x @ self.frequencies[c].T + self.phases[c])
            L = self.mixing_chol[c]
            block = out[:, c * M * D : (c + 1) * M * D]
            for j in range(M):
                block[:, j * D : (j + 1) * D] = L[m - 1, j][:, None] * phi
        return out


@dataclass(frozen=True)
class WeightSample:
    """One feature-space weight draw plus the output transform of its model."""

    w: np.ndarray
    y_mean: float = 0.0
    y_std: float = 1.0

    def evaluate(self, fmap, x, m):
        """Sampled function values at rows of x, fidelity m, original scale."""
        return self.y_mean + self.y_std * (fmap.features(x, m) @ self.w)


def build_feature_map(params, n_bases, seed):
    """Draw frequencies and phases; bit-identical for identical seeds."""
    if int(n_bases) < 1:
        raise InputError("n_bases must be >= 1")
    D = int(n_bases)
    rng = np.random.Generator(np.random.PCG64(_as_seedseq(seed)))
    C, d = params.n_latent, params.n_dims
    M = params.n_fidelities
    freqs = np.empty((C, D, d))
    phases = np.empty((C, D))
    for c in range(C):
        freqs[c] = rng.standard_normal((D, d)) / params.lengthscales[c]
        phases[c] = rng.uniform(0.0, 2.0 * np.pi, D)
    mix = np.empty((C, M, M))
    for c in range(C):
        w = params.weights[c]
        B = np.outer(w, w) + np.diag(params.kappas[c])
        L, _ = chol_with_jitter(B, scale=max(float(np.mean(np.diag(B))), 1e-12))
        mix[c] = L
    return RfmFeatureMap(params=params, frequencies=freqs, phases=phases, mixing_chol=mix)


def _as_seedseq(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(int(seed))


def sample_weight_matrix(model, fmap, rng, n_samples, phi_train=None, gram=None):
    """Draw n_samples posterior weight vectors, shape (n_samples, F).

    Weights act on normalized targets; combine with the model's output
    transform to get original-scale values.  ``phi_train`` and ``gram``
    (Phi Phi^T) may be passed in by callers that cache them.
    """
    F = fmap.n_features
    n = model.n_train_
    noise = model.hyperparams.noise_variance
    if phi_train is None:
        phi_train = (
            fmap.features_rows(model.train_x_, model.train_m_)
            if n
            else np.zeros((0, F))
        )
    if n == 0:
        return rng.standard_normal((n_samples, F))
    sigma = np.sqrt(noise)
    if n < F:
        # Dual-form (Matheron) update: exact, O(n^3) instead of O(F^3).
        w0 = rng.standard_normal((n_samples, F))
        eps = sigma * rng.standard_normal((n_samples, n))
        if gram is None:
            gram = phi_train @ phi_train.T
        B = gram + noise * np.eye(n)
        LB, _ = chol_with_jitter(B, scale=max(float(np.mean(np.diag(gram))), noise))
        resid = model.y_[None, :] - w0 @ phi_train.T - eps
        half = solve_triangular(LB, resid.T, lower=True)
        corr = solve_triangular(LB.T, half, lower=False)
        return w0 + (phi_train.T @ corr).T
    A = phi_train.T @ phi_train + noise * np.eye(F)
    LA, _ = chol_with_jitter(A, scale=float(np.mean(np.diag(A))))
    rhs = phi_train.T @ model.y_
    mean = solve_triangular(LA.T, solve_triangular(LA, rhs, lower=True), lower=False)
    z = rng.standard_normal((n_samples, F))
    # cov = sigma_n^2 A^{-1} = (sigma_n L^{-T}) (sigma_n L^{-T})^T
    return mean[None, :] + sigma * solve_triangular(LA.T, z.T, lower=False).T


def sample_posterior_weights(model, fmap, seed):
    """Single posterior weight draw as a WeightSample."""
    rng = np.random.Generator(np.random.PCG64(_as_seedseq(seed)))
    w = sample_weight_matrix(model, fmap, rng, 1)[0]
    return WeightSample(w=w, y_mean=model.y_mean_, y_std=model.y_std_)


def sample_max_value(ws, fmap, candidates):
    """Max of the sampled top-fidelity function over a candidate set."""
    candidates = check_points(candidates, d=fmap.params.n_dims, name="candidates")
    if candidates.shape[0] == 0:
        raise InputError("candidates must be nonempty")
    vals = ws.evaluate(fmap, candidates, fmap.params.n_fidelities)
    return float(np.max(vals))


def sample_pending_values(ws, fmap, pending_x, pending_m):
    """Sampled function values at pending (x, m) pairs, original scale."""
    pending_x = check_points(pending_x, d=fmap.params.n_dims, name="pending_x")
    pending_m = check_fidelities(
        pending_m, n=pending_x.shape[0], n_fidelities=fmap.params.n_fidelities
    )
    phi = fmap.features_rows(pending_x, pending_m)
    return ws.y_mean + ws.y_std * (phi @ ws.w)


# -- Gumbel approximation ------------------------------------------------------


@dataclass(frozen=True)
class GumbelFit:
    """Quartile-matched Gumbel approximation to the max-value distribution."""

    y25: float
    y50: float
    y75: float
    loc: float
    scale: float


def fit_gumbel_max(model, candidates):
    """Fit a Gumbel to the product-CDF approximation of max f^(M) over candidates.

    P(f* <= y) is approximated by the product of per-candidate marginal CDFs;
    the Gumbel is matched at the quartiles found by bisection.
    """
    candidates = check_points(candidates, d=model.hyperparams.n_dims)
    if candidates.shape[0] == 0:
        raise InputError("candidates must be nonempty")
    M = model.hyperparams.n_fidelities
    mu, var = model.predict_moments(candidates, M)
    sd = np.sqrt(np.maximum(var, 1e-16))

    def log_prod_cdf(y):
        return float(np.sum(log_ndtr((y - mu) / sd)))

    lo = float(np.min(mu - 8.0 * sd))
    hi = float(np.max(mu + 8.0 * sd))
    for _ in range(64):
        if log_prod_cdf(lo) < np.log(0.25):
            break
        lo -= (hi - lo)
    else:
        raise InputError("failed to bracket the lower quartile")

    def quantile(p):
        a, b = lo, hi
        target = np.log(p)
        for _ in range(100):
            mid = 0.5 * (a + b)
            if log_prod_cdf(mid) < target:
                a = mid
            else:
                b = mid
        return 0.5 * (a + b)

    y25, y50, y75 = quantile(0.25), quantile(0.5), quantile(0.75)
    # Gumbel quantile y_p = loc - scale*log(-log p); match 25/75, center at 50.
    scale = (y25 - y75) / (np.log(np.log(4.0 / 3.0)) - np.log(np.log(4.0)))
    loc = y50 + scale * np.log(np.log(2.0))
    return GumbelFit(y25=y25, y50=y50, y75=y75, loc=loc, scale=scale)


def sample_max_values_gumbel(model, candidates, n_samples, seed):
    """Draw approximate max values through the fitted Gumbel's inverse CDF."""
    fit = fit_gumbel_max(model, candidates)
    rng = np.random.Generator(np.random.PCG64(_as_seedseq(seed)))
    u = rng.uniform(size=int(n_samples))
    return fit.loc - fit.scale * np.log(-np.log(u))
