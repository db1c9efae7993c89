"""Multi-fidelity Gaussian process regression.

A single GP over (input, fidelity) pairs with the latent-factor kernel from
:mod:`mfmes.kernels`.  The estimator follows the scikit-learn conventions:
``fit(X, y)`` with the fidelity carried as the trailing column of ``X``,
fitted attributes with trailing underscores, and ``get_params`` round-trips.

Beyond the standard predictive moments, the model exposes the two quantities
the acquisition needs: joint moments of (f^(m)_x, f^(M)_x) at a shared input,
and moments conditioned on a set of pending (dispatched, unobserved) queries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky, solve_triangular
from sklearn.base import BaseEstimator, RegressorMixin

from .errors import InputError, ModelError
from .kernels import SlfmHyperparams, kernel_matrix
from .validation import augment, check_fidelities, check_points, check_vector, split_augmented

__all__ = [
    "JointMoments",
    "ConditionalMoments",
    "MultiFidelityGP",
    "chol_with_jitter",
    "slfm_log_marginal_likelihood",
]

# Escalation ladder for Cholesky jitter, relative to mean(diag K).
_JITTER_START = 1e-10
_JITTER_MAX = 1e-4


def chol_with_jitter(A, scale=None):
    """Lower Cholesky factor of A, escalating diagonal jitter on failure.

    Returns (L, jitter_used).  Raises ModelError carrying the final jitter
    when even the largest jitter fails.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if n == 0:
        return np.zeros((0, 0)), 0.0
    if scale is None:
        scale = float(np.mean(np.diag(A)))
    if not np.isfinite(scale) or scale <= 0:
        scale = 1.0
    jitter = 0.0
    while True:
        try:
            L = cholesky(A + jitter * np.eye(n), lower=True)
            return L, jitter
        except np.linalg.LinAlgError:
            pass
        except ValueError:
            pass
        if jitter == 0.0:
            jitter = _JITTER_START * scale
        elif jitter < _JITTER_MAX * scale:
            jitter = min(jitter * 10.0, _JITTER_MAX * scale)
        else:
            raise ModelError(
                f"Cholesky factorization failed at jitter {jitter:g}",
                jitter=jitter,
            )


def slfm_log_marginal_likelihood(params, x, m, y):
    """log N(y | 0, K + noise_variance I) for raw (unnormalized) targets."""
    x = check_points(x, d=params.n_dims)
    m = check_fidelities(m, n=x.shape[0], n_fidelities=params.n_fidelities)
    y = check_vector(y, n=x.shape[0])
    n = x.shape[0]
    K = kernel_matrix(params, x, m, x, m)
    C = K + params.noise_variance * np.eye(n)
    L, _ = chol_with_jitter(C, scale=float(np.mean(np.diag(K))) if n else None)
    alpha = solve_triangular(L, y, lower=True)
    return float(
        -0.5 * alpha @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * n * np.log(2 * np.pi)
    )


@dataclass(frozen=True)
class JointMoments:
    """Posterior moments of (f^(m)_x, f^(M)_x) at a shared input x.

    All fields are floats; variances are clamped at 0 and the cross term is
    rescaled to satisfy |cov_mM| <= sqrt(var_m * var_M).
    """

    mu_m: float
    var_m: float
    mu_M: float
    var_M: float
    cov_mM: float


@dataclass(frozen=True)
class ConditionalMoments:
    """Moments of (f^(m)_x, f^(M)_x) given pending values f_Q.

    The conditional covariance is constant in f_Q; the means are affine:
    ``means_given(f_q) = (base_mu_m, base_mu_M) + gain @ (f_q - mu_q)``.
    """

    base_mu_m: float
    base_mu_M: float
    mu_q: np.ndarray        # (q',) unconditional predictive means at Q
    gain: np.ndarray        # (2, q') rows ordered (m, M)
    var_m: float
    var_M: float
    cov_mM: float

    def means_given(self, f_q):
        f_q = np.asarray(f_q, dtype=float)
        shift = self.gain @ (f_q - self.mu_q) if self.mu_q.size else np.zeros(2)
        return self.base_mu_m + shift[0], self.base_mu_M + shift[1]


def _clamp_second_moments(var_m, var_M, cov):
    """Clamp variances at 0 and rescale cov to the Cauchy-Schwarz bound."""
    var_m = np.maximum(var_m, 0.0)
    var_M = np.maximum(var_M, 0.0)
    bound = np.sqrt(var_m * var_M)
    cov = np.clip(cov, -bound, bound)
    return var_m, var_M, cov


class MultiFidelityGP(BaseEstimator, RegressorMixin):
    """GP over (input, fidelity) pairs with the latent-factor kernel.

    Parameters
    ----------
    hyperparams : SlfmHyperparams
        Kernel hyperparameters, including the observation-noise variance.
    normalize_y : bool, default False
        Standardize targets to mean 0 / std 1 before fitting; all returned
        moments are mapped back to the original scale.
    """

    def __init__(self, hyperparams=None, normalize_y=False):
        self.hyperparams = hyperparams
        self.normalize_y = normalize_y

    # -- fitting -----------------------------------------------------------

    def fit(self, X, y):
        if self.hyperparams is None:
            raise InputError("hyperparams must be set before fit")
        params = self.hyperparams
        x, m = split_augmented(X, n_fidelities=params.n_fidelities)
        y = check_vector(y, n=x.shape[0])
        if x.shape[1] != params.n_dims:
            raise InputError(
                f"X has {x.shape[1]} input dims, hyperparams expect {params.n_dims}"
            )
        if self.normalize_y and y.size:
            self.y_mean_ = float(np.mean(y))
            std = float(np.std(y))
            self.y_std_ = std if std > 0 else 1.0
        else:
            self.y_mean_, self.y_std_ = 0.0, 1.0
        self.train_x_ = x
        self.train_m_ = m
        self.y_raw_ = y
        self.y_ = (y - self.y_mean_) / self.y_std_
        n = x.shape[0]
        K = kernel_matrix(params, x, m, x, m)
        C = K + params.noise_variance * np.eye(n)
        scale = float(np.mean(np.diag(K))) if n else None
        self.chol_, self.jitter_ = chol_with_jitter(C, scale=scale)
        self.alpha_ = (
            solve_triangular(self.chol_, self.y_, lower=True) if n else np.zeros(0)
        )
        # alpha_ holds L^{-1} y; weights_ holds C^{-1} y.
        self.weights_ = (
            solve_triangular(self.chol_.T, self.alpha_, lower=False)
            if n
            else np.zeros(0)
        )
        self.lml_ = float(
            -0.5 * self.alpha_ @ self.alpha_
            - np.sum(np.log(np.diag(self.chol_)))
            - 0.5 * n * np.log(2 * np.pi)
        )
        return self

    @property
    def n_train_(self):
        return self.train_x_.shape[0]

    def log_marginal_likelihood(self):
        """log N(y | 0, C) of the fitted (possibly normalized) targets."""
        return self.lml_

    # -- linear algebra helpers --------------------------------------------

    def _k_train(self, x, m):
        """Covariance between probe rows (x, m) and the training rows."""
        if self.n_train_ == 0:
            return np.zeros((np.shape(x)[0], 0))
        return kernel_matrix(self.hyperparams, x, m, self.train_x_, self.train_m_)

    def _whiten(self, k):
        """L^{-1} k^T for probe cross-covariance k, shape (n_train, n_probe)."""
        if self.n_train_ == 0:
            return np.zeros((0, k.shape[0]))
        return solve_triangular(self.chol_, k.T, lower=True)

    def posterior_cov(self, x1, m1, x2, m2):
        """Posterior covariance matrix between two probe sets, original scale."""
        x1 = check_points(x1, d=self.hyperparams.n_dims, name="x1")
        x2 = check_points(x2, d=self.hyperparams.n_dims, name="x2")
        m1 = check_fidelities(m1, n=x1.shape[0], n_fidelities=self.hyperparams.n_fidelities)
        m2 = check_fidelities(m2, n=x2.shape[0], n_fidelities=self.hyperparams.n_fidelities)
        prior = kernel_matrix(self.hyperparams, x1, m1, x2, m2)
        if self.n_train_ == 0:
            return prior * self.y_std_**2
        v1 = self._whiten(self._k_train(x1, m1))
        v2 = self._whiten(self._k_train(x2, m2))
        return (prior - v1.T @ v2) * self.y_std_**2

    # -- predictive moments --------------------------------------------------

    def predict_moments(self, x, m):
        """Posterior mean and variance of f^(m) at rows of x.

        ``m`` may be a scalar fidelity or a per-row vector.  Variances are
        clamped at 0.
        """
        x = check_points(x, d=self.hyperparams.n_dims)
        m = np.broadcast_to(
            check_fidelities(m, n_fidelities=self.hyperparams.n_fidelities),
            (x.shape[0],),
        )
        prior_var = self.hyperparams.prior_variance(m)
        if self.n_train_ == 0:
            mu = np.zeros(x.shape[0])
            var = prior_var.copy()
        else:
            k = self._k_train(x, m)
            mu = k @ self.weights_
            v = self._whiten(k)
            var = np.maximum(prior_var - np.sum(v * v, axis=0), 0.0)
        return self.y_mean_ + self.y_std_ * mu, self.y_std_**2 * var

    def predict(self, X, return_std=False):
        x, m = split_augmented(X, n_fidelities=self.hyperparams.n_fidelities)
        mu, var = self.predict_moments(x, m)
        if return_std:
            return mu, np.sqrt(var)
        return mu

    def joint_moments(self, x, m):
        """JointMoments of (f^(m), f^(M)) at a single input x."""
        x = check_points(x, d=self.hyperparams.n_dims)
        if x.shape[0] != 1:
            raise InputError("joint_moments expects a single input row")
        m = int(np.asarray(m).item())
        check_fidelities(m, n_fidelities=self.hyperparams.n_fidelities)
        mu_m, var_m, mu_M, var_M, cov = self.joint_moment_arrays(x, m)
        return JointMoments(
            mu_m=float(mu_m[0]),
            var_m=float(var_m[0]),
            mu_M=float(mu_M[0]),
            var_M=float(var_M[0]),
            cov_mM=float(cov[0]),
        )

    def joint_moment_arrays(self, x, m):
        """Vectorized joint moments for all rows of x at a shared fidelity m."""
        params = self.hyperparams
        M = params.n_fidelities
        n = x.shape[0]
        mvec = np.full(n, m)
        Mvec = np.full(n, M)
        mu_m, var_m = self.predict_moments(x, mvec)
        if m == M:
            return mu_m, var_m, mu_m.copy(), var_m.copy(), var_m.copy()
        mu_M, var_M = self.predict_moments(x, Mvec)
        cross_prior = params.prior_cross(m, M) * np.ones(n)
        if self.n_train_ == 0:
            cov = cross_prior * self.y_std_**2
        else:
            v_m = self._whiten(self._k_train(x, mvec))
            v_M = self._whiten(self._k_train(x, Mvec))
            cov = (cross_prior - np.sum(v_m * v_M, axis=0)) * self.y_std_**2
        var_m, var_M, cov = _clamp_second_moments(var_m, var_M, cov)
        return mu_m, var_m, mu_M, var_M, cov

    # -- pending-query conditioning -----------------------------------------

    def conditional_given_pending(self, x, m, pending_x, pending_m):
        """Moments of (f^(m)_x, f^(M)_x) given latent values at pending queries.

        The pending values themselves are random; conditioning yields a
        constant 2x2 covariance and an affine map from f_Q to the means,
        both packaged in ConditionalMoments.
        """
        params = self.hyperparams
        x = check_points(x, d=params.n_dims)
        if x.shape[0] != 1:
            raise InputError("conditional_given_pending expects a single input row")
        m = int(np.asarray(m).item())
        check_fidelities(m, n_fidelities=params.n_fidelities)
        pending_x = check_points(pending_x, d=params.n_dims, name="pending_x")
        if pending_x.shape[0] == 0:
            raise InputError("pending set must be nonempty")
        pending_m = check_fidelities(
            pending_m, n=pending_x.shape[0], n_fidelities=params.n_fidelities,
            name="pending_m",
        )
        M = params.n_fidelities
        pair_x = np.vstack([x, x])
        pair_m = np.array([m, M])

        S_pair = self.posterior_cov(pair_x, pair_m, pair_x, pair_m)
        A = self.posterior_cov(pair_x, pair_m, pending_x, pending_m)
        S_q = self.posterior_cov(pending_x, pending_m, pending_x, pending_m)
        Lq, _ = chol_with_jitter(S_q)
        # gain = A S_q^{-1} computed through the factor of S_q.
        half = solve_triangular(Lq, A.T, lower=True)           # L^{-1} A^T
        gain = solve_triangular(Lq.T, half, lower=False).T     # A S_q^{-1}
        cond = S_pair - half.T @ half

        mu_pair_m, _ = self.predict_moments(x, m)
        mu_pair_M, _ = self.predict_moments(x, M)
        mu_q, _ = self.predict_moments(pending_x, pending_m)
        var_m, var_M, cov = _clamp_second_moments(cond[0, 0], cond[1, 1], cond[0, 1])
        return ConditionalMoments(
            base_mu_m=float(mu_pair_m[0]),
            base_mu_M=float(mu_pair_M[0]),
            mu_q=mu_q,
            gain=gain,
            var_m=float(var_m),
            var_M=float(var_M),
            cov_mM=float(cov),
        )
