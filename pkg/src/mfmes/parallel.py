"""Acquisition under pending queries and the asynchronous simulator entry.

While q-1 workers are busy, the value of a new query is judged after
conditioning the model on the (unknown) outcomes f_Q of the pending queries:
sampled jointly with each optimum value f* from one feature-space weight
draw, f_Q shifts the predictive means affinely while the conditional
covariance stays fixed.  The per-sample gain then has exactly the sequential
form in the centered variables

    tilde_f* = f* - mu^(M)_{x|f_Q},   tilde_f_m = f^(m)_x - mu^(m)_{x|f_Q},

so the same bounded-entropy core applies, with the top fidelity falling out
of the degenerate (perfectly coupled) branch in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import log_ndtr

from .acquisition import (
    _DETERMINED_REL,
    AcquisitionResult,
    CostVector,
    argmax_score,
)
from .entropy import _LOG_2PIE, QuadratureSpec, bounded_entropy_core
from .errors import InputError
from .gp import _clamp_second_moments, chol_with_jitter
from .validation import check_fidelities, check_points, check_vector

__all__ = [
    "PendingSet",
    "eta_density",
    "parallel_info_gain",
    "score_candidates_pending",
    "select_next_parallel",
    "simulate_async",
]

_LOG_2PI = np.log(2.0 * np.pi)
_DEGENERATE_REL = 1e-12
_SCORE_CHUNK = 2048


@dataclass(frozen=True)
class PendingSet:
    """Queries dispatched but not yet completed, with their schedule."""

    x: np.ndarray                # (q', d)
    m: np.ndarray                # (q',)
    dispatch_time: np.ndarray    # (q',)
    completion_time: np.ndarray  # (q',)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        m = np.asarray(self.m, dtype=int)
        td = np.asarray(self.dispatch_time, dtype=float)
        tc = np.asarray(self.completion_time, dtype=float)
        if not (x.shape[0] == m.size == td.size == tc.size):
            raise InputError("pending fields must share their leading length")
        if np.any(tc < td):
            raise InputError("completion times must be >= dispatch times")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "dispatch_time", td)
        object.__setattr__(self, "completion_time", tc)

    @property
    def size(self):
        return self.m.size


def conditional_moment_arrays(model, x_chunk, m, pending_x, pending_m):
    """Vectorized pending-conditioned joint moments for rows of x_chunk.

    Returns (mu_m, mu_M, var_m, var_M, cov, gain_m, gain_M, mu_q): the
    unconditional means, the (f_Q-independent) conditional covariances, and
    the affine gains mapping f_Q - mu_q to mean shifts.
    """
    params = model.hyperparams
    M = params.n_fidelities
    n = x_chunk.shape[0]
    mu_m, var_m, mu_M, var_M, cov = model.joint_moment_arrays(x_chunk, m)
    mvec = np.full(n, m)
    Mvec = np.full(n, M)
    A_m = model.posterior_cov(x_chunk, mvec, pending_x, pending_m)
    A_M = A_m if m == M else model.posterior_cov(x_chunk, Mvec, pending_x, pending_m)
    S_q = model.posterior_cov(pending_x, pending_m, pending_x, pending_m)
    Lq, _ = chol_with_jitter(S_q, scale=max(float(np.mean(np.diag(S_q))), 1e-12))
    half_m = solve_triangular(Lq, A_m.T, lower=True)          # (q', n)
    half_M = half_m if m == M else solve_triangular(Lq, A_M.T, lower=True)
    gain_m = solve_triangular(Lq.T, half_m, lower=False).T    # (n, q')
    gain_M = gain_m if m == M else solve_triangular(Lq.T, half_M, lower=False).T
    var_m_c = var_m - np.sum(half_m * half_m, axis=0)
    var_M_c = var_M - np.sum(half_M * half_M, axis=0)
    cov_c = cov - np.sum(half_m * half_M, axis=0)
    var_m_c, var_M_c, cov_c = _clamp_second_moments(var_m_c, var_M_c, cov_c)
    mu_q, _ = model.predict_moments(pending_x, pending_m)
    return mu_m, mu_M, var_m_c, var_M_c, cov_c, gain_m, gain_M, mu_q


def _pending_gains_chunk(model, x_chunk, m, f_star, f_q, pending_x, pending_m, quad):
    """Mean pending-conditioned information gain per row of x_chunk."""
    (mu_m, mu_M, var_m_c, var_M_c, cov_c, gain_m, gain_M, mu_q) = (
        conditional_moment_arrays(model, x_chunk, m, pending_x, pending_m)
    )
    prior = model.hyperparams.prior_variance(m) * model.y_std_**2
    live = (var_m_c > _DETERMINED_REL * prior) & (var_M_c > _DETERMINED_REL * prior)
    gains = np.zeros(x_chunk.shape[0])
    if not np.any(live):
        return gains
    idx = np.flatnonzero(live)
    resid = (f_q - mu_q[None, :]).T                       # (q', S)
    mu_M_cond = mu_M[idx, None] + gain_M[idx] @ resid     # (n_live, S)
    delta = f_star[None, :] - mu_M_cond
    h_bound = bounded_entropy_core(
        delta, var_m_c[idx, None], var_M_c[idx, None], cov_c[idx, None], quad
    ).mean(axis=1)
    gains[idx] = 0.5 * (_LOG_2PIE + np.log(var_m_c[idx])) - h_bound
    return gains


def _check_pending(model, pending_x, pending_m):
    pending_x = check_points(pending_x, d=model.hyperparams.n_dims, name="pending_x")
    if pending_x.shape[0] == 0:
        raise InputError("pending set is empty; use the sequential path")
    pending_m = check_fidelities(
        pending_m, n=pending_x.shape[0], n_fidelities=model.hyperparams.n_fidelities,
        name="pending_m",
    )
    return pending_x, pending_m


def _check_joint_samples(joint_samples, n_pending):
    """Normalize joint (f*, f_Q) samples to arrays (S,), (S, q')."""
    if isinstance(joint_samples, tuple) and len(joint_samples) == 2:
        f_star, f_q = joint_samples
    else:
        pairs = list(joint_samples)
        if not pairs:
            raise InputError("joint_samples must be nonempty")
        f_star = np.array([p[0] for p in pairs], dtype=float)
        f_q = np.array([np.asarray(p[1], dtype=float).ravel() for p in pairs])
    f_star = np.asarray(f_star, dtype=float).ravel()
    f_q = np.asarray(f_q, dtype=float)
    if f_q.ndim != 2 or f_q.shape != (f_star.size, n_pending):
        raise InputError(
            f"joint samples must pair each f* with {n_pending} pending values"
        )
    if f_star.size == 0:
        raise InputError("joint_samples must be nonempty")
    return f_star, f_q


def eta_density(tilde_f_star, tilde_f_m, cm):
    """Density of the centered fidelity-m value under the max bound.

    ``cm`` supplies the pending-conditioned covariances (means are already
    subtracted in the tilde variables).  Vectorized over ``tilde_f_m``;
    computed in log space, with the perfectly-coupled limit handled as a hard
    threshold.
    """
    if not cm.var_m > 0:
        raise InputError("conditional var_m must be positive")
    tilde_f_m = np.asarray(tilde_f_m, dtype=float)
    sigma = np.sqrt(cm.var_m)
    sigma_M = np.sqrt(cm.var_M)
    a = cm.cov_mM / cm.var_m
    sp2 = cm.var_M - cm.cov_mM**2 / cm.var_m
    arg = tilde_f_star - a * tilde_f_m
    if sp2 <= _DEGENERATE_REL * cm.var_M:
        logA = np.where(arg >= 0, 0.0, -np.inf)
    else:
        logA = log_ndtr(arg / np.sqrt(sp2))
    z = tilde_f_m / sigma
    logq = logA - 0.5 * (z * z + _LOG_2PI) - np.log(sigma)
    logq = logq - log_ndtr(tilde_f_star / sigma_M)
    out = np.where(np.isneginf(logA), 0.0, np.exp(logq))
    return float(out) if out.ndim == 0 else out


def parallel_info_gain(
    model, x, m, pending_x, pending_m, joint_samples, quad=QuadratureSpec()
):
    """Mean information gain of (x, m) about f*, conditioned on pending f_Q.

    ``joint_samples`` holds (f*, f_Q) pairs drawn from shared weight samples;
    the mean over them estimates the expectation over both.  Not divided by
    cost.
    """
    x = check_points(x, d=model.hyperparams.n_dims)
    if x.shape[0] != 1:
        raise InputError("parallel_info_gain expects a single input row")
    m = int(m)
    check_fidelities(m, n_fidelities=model.hyperparams.n_fidelities)
    pending_x, pending_m = _check_pending(model, pending_x, pending_m)
    f_star, f_q = _check_joint_samples(joint_samples, pending_x.shape[0])
    return float(
        _pending_gains_chunk(model, x, m, f_star, f_q, pending_x, pending_m, quad)[0]
    )


def score_candidates_pending(
    model, candidates, pending_x, pending_m, f_star, f_q, costs, quad=QuadratureSpec()
):
    """Cost-normalized pending-conditioned scores, (M, n_candidates)."""
    candidates = check_points(candidates, d=model.hyperparams.n_dims, name="candidates")
    if candidates.shape[0] == 0:
        raise InputError("candidates must be nonempty")
    pending_x, pending_m = _check_pending(model, pending_x, pending_m)
    f_star = check_vector(f_star, name="f_star")
    f_q = np.asarray(f_q, dtype=float)
    if f_q.shape != (f_star.size, pending_x.shape[0]):
        raise InputError("f_q must be (n_samples, n_pending)")
    if not isinstance(costs, CostVector):
        costs = CostVector(costs)
    M = model.hyperparams.n_fidelities
    if len(costs) != M:
        raise InputError(f"costs has {len(costs)} entries, model has {M} fidelities")
    n = candidates.shape[0]
    scores = np.empty((M, n))
    for m in range(1, M + 1):
        lam = costs.of(m)
        for start in range(0, n, _SCORE_CHUNK):
            chunk = candidates[start : start + _SCORE_CHUNK]
            scores[m - 1, start : start + chunk.shape[0]] = (
                _pending_gains_chunk(
                    model, chunk, m, f_star, f_q, pending_x, pending_m, quad
                )
                / lam
            )
    return scores


def select_next_parallel(
    model,
    candidates,
    pending_x,
    pending_m,
    n_samples,
    costs,
    seed,
    quad=QuadratureSpec(),
    n_bases=1000,
    keep_scores=True,
):
    """Argmax of pending-conditioned info gain per cost.

    Draws ``n_samples`` weight samples from a fresh feature map, evaluates
    each at the candidates (for f*) and at the pending queries (for f_Q), and
    averages the per-sample gains.  Tie-break matches the sequential rule.
    """
    from .rfm import build_feature_map, sample_weight_matrix

    candidates = check_points(candidates, d=model.hyperparams.n_dims, name="candidates")
    if candidates.shape[0] == 0:
        raise InputError("candidates must be nonempty")
    pending_x, pending_m = _check_pending(model, pending_x, pending_m)
    if int(n_samples) < 1:
        raise InputError("n_samples must be >= 1")
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(int(seed))
    children = seq.spawn(2)
    fmap = build_feature_map(model.hyperparams, n_bases, children[0])
    rng = np.random.Generator(np.random.PCG64(children[1]))
    W = sample_weight_matrix(model, fmap, rng, int(n_samples))
    M = model.hyperparams.n_fidelities
    vals = model.y_mean_ + model.y_std_ * (fmap.features(candidates, M) @ W.T)
    f_star = vals.max(axis=0)
    phi_q = fmap.features_rows(pending_x, pending_m)
    f_q = model.y_mean_ + model.y_std_ * (W @ phi_q.T)
    scores = score_candidates_pending(
        model, candidates, pending_x, pending_m, f_star, f_q, costs, quad
    )
    m, idx = argmax_score(scores)
    return AcquisitionResult(
        index=idx,
        fidelity=m,
        x=candidates[idx].copy(),
        value=float(scores[m - 1, idx]),
        scores=scores if keep_scores else None,
    )


def simulate_async(objective, config, seed=None):
    """Discrete-event simulation of q workers; returns one seed's trace.

    Evaluating fidelity m occupies a worker for cost_m simulated time units;
    each completion appends the observation, refits on cadence, and
    dispatches the freed worker via the pending-conditioned acquisition.
    ``seed`` defaults to the first entry of ``config.seeds``.
    """
    from . import engine

    return engine.run_async_loop(objective, config, seed=seed)
