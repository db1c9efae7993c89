"""Semiparametric latent-factor covariance over (input, fidelity) pairs.

Fidelity m is modeled as a weighted sum of C shared latent GPs plus an
independent per-fidelity component:

    k((x, m), (x', m')) = sum_c (w_{c,m} w_{c,m'} + kappa_{c,m} [m = m'])
                          * exp(-sum_i (x_i - x'_i)^2 / (2 l_{c,i}^2))

All latent correlations are ARD Gaussian with unit variance, so the mixing
weights carry the full output scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InputError
from .validation import check_points

__all__ = ["SlfmHyperparams", "kernel_matrix", "kernel_diag", "latent_correlation"]


@dataclass(frozen=True)
class SlfmHyperparams:
    """Kernel hyperparameters.

    lengthscales : (C, d) positive ARD lengthscales per latent process
    weights      : (C, M) mixing weights w_{c,m}
    kappas       : (C, M) nonnegative independent-component scales kappa_{c,m}
    noise_variance : observation noise variance (>= 0)
    """

    lengthscales: np.ndarray
    weights: np.ndarray
    kappas: np.ndarray
    noise_variance: float = 1e-6

    def __post_init__(self):
        ls = np.atleast_2d(np.asarray(self.lengthscales, dtype=float))
        w = np.atleast_2d(np.asarray(self.weights, dtype=float))
        k = np.atleast_2d(np.asarray(self.kappas, dtype=float))
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "kappas", k)
        if ls.ndim != 2 or np.any(ls <= 0) or not np.all(np.isfinite(ls)):
            raise InputError("lengthscales must be a positive (C, d) array")
        if w.shape[0] != ls.shape[0] or k.shape != w.shape:
            raise InputError(
                "weights and kappas must both be (C, M) with C matching "
                f"lengthscales; got {w.shape}, {k.shape}, C={ls.shape[0]}"
            )
        if not np.all(np.isfinite(w)):
            raise InputError("weights must be finite")
        if np.any(k < 0) or not np.all(np.isfinite(k)):
            raise InputError("kappas must be finite and >= 0")
        if not (np.isfinite(self.noise_variance) and self.noise_variance >= 0):
            raise InputError("noise_variance must be finite and >= 0")

    @property
    def n_latent(self):
        return self.lengthscales.shape[0]

    @property
    def n_dims(self):
        return self.lengthscales.shape[1]

    @property
    def n_fidelities(self):
        return self.weights.shape[1]

    def prior_variance(self, m):
        """Prior variance of fidelity m at any input (latents have unit scale)."""
        m = np.asarray(m, dtype=int) - 1
        return np.sum(self.weights[:, m] ** 2 + self.kappas[:, m], axis=0)

    def prior_cross(self, m, mprime):
        """Prior covariance between fidelities m and m' at a shared input."""
        i, j = int(m) - 1, int(mprime) - 1
        cross = float(np.sum(self.weights[:, i] * self.weights[:, j]))
        if i == j:
            cross += float(np.sum(self.kappas[:, i]))
        return cross

    def with_noise(self, noise_variance):
        return replace(self, noise_variance=float(noise_variance))


def latent_correlation(x1, x2, lengthscales):
    """ARD Gaussian correlation matrix of one latent, shape (n1, n2)."""
    z1 = x1 / lengthscales
    z2 = x2 / lengthscales
    sq = (
        np.sum(z1**2, axis=1)[:, None]
        + np.sum(z2**2, axis=1)[None, :]
        - 2.0 * z1 @ z2.T
    )
    return np.exp(-0.5 * np.maximum(sq, 0.0))


def kernel_matrix(params, x1, m1, x2, m2):
    """Cross-covariance matrix between (x1, m1) rows and (x2, m2) rows."""
    x1 = check_points(x1, d=params.n_dims, name="x1")
    x2 = check_points(x2, d=params.n_dims, name="x2")
    m1 = np.asarray(m1, dtype=int)
    m2 = np.asarray(m2, dtype=int)
    same = m1[:, None] == m2[None, :]
    K = np.zeros((x1.shape[0], x2.shape[0]))
    for c in range(params.n_latent):
        kc = latent_correlation(x1, x2, params.lengthscales[c])
        w = params.weights[c]
        coeff = w[m1 - 1][:, None] * w[m2 - 1][None, :]
        coeff = coeff + np.where(same, params.kappas[c][m1 - 1][:, None], 0.0)
        K += coeff * kc
    return K


def kernel_diag(params, x, m):
    """Prior variances of (x_i, m_i) rows (independent of x for this kernel)."""
    m = np.asarray(m, dtype=int)
    return params.prior_variance(m) * np.ones(np.shape(x)[0] if np.ndim(x) == 2 else 1)
