"""Information-per-cost acquisition for sequential multi-fidelity search.

The score of querying candidate x at fidelity m is the expected reduction in
the entropy of f^(m)_x from learning that the top-fidelity optimum value is
f*, averaged over a sampled set of optimum values and divided by the query
cost:

    a(x, m) = mean_{f*} [ H(f^(m)_x) - H(f^(m)_x | f^(M)_x <= f*) ] / cost_m

Both entropies are computed from the model's joint (f^(m), f^(M)) moments at
x; the conditional entropy comes from the bounded-marginal core in
``entropy``, which covers m = M (perfectly coupled pair) and m < M uniformly.
With M = 1 this reduces to single-fidelity max-value entropy search.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .entropy import _LOG_2PIE, QuadratureSpec, bounded_entropy_core
from .errors import InputError
from .validation import check_points

__all__ = [
    "CostVector",
    "AcquisitionResult",
    "info_gain",
    "score_candidates",
    "select_next",
    "run_sequential",
]

# Candidates whose effective variance falls below this fraction of the prior
# variance are treated as fully determined: their information gain is 0.
_DETERMINED_REL = 1e-9

_SCORE_CHUNK = 2048


@dataclass(frozen=True)
class CostVector:
    """Per-fidelity query costs, positive and nondecreasing in fidelity."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size == 0:
            raise InputError("costs must be nonempty")
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise InputError("costs must be positive and finite")
        if np.any(np.diff(v) < 0):
            raise InputError("costs must be nondecreasing in fidelity")
        object.__setattr__(self, "values", v)

    def of(self, m):
        m = int(m)
        if not 1 <= m <= self.values.size:
            raise InputError(f"fidelity {m} outside 1..{self.values.size}")
        return float(self.values[m - 1])

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class AcquisitionResult:
    """Chosen candidate with its cost-normalized score.

    ``scores`` optionally keeps the full (M, n_candidates) table for
    diagnostics; ``value`` always equals its maximum.
    """

    index: int
    fidelity: int
    x: np.ndarray
    value: float
    scores: np.ndarray | None = None


def _gains_for_chunk(model, x_chunk, m, f_star_values, quad, noisy):
    """Mean information gain over f* for each row of x_chunk at fidelity m."""
    mu_m, var_m, mu_M, var_M, cov = model.joint_moment_arrays(x_chunk, m)
    noise = model.hyperparams.noise_variance * model.y_std_**2 if noisy else 0.0
    var_eff = var_m + noise
    prior = model.hyperparams.prior_variance(m) * model.y_std_**2 + noise
    live = (var_eff > _DETERMINED_REL * prior) & (var_M > _DETERMINED_REL * prior)
    if not np.any(live):
        return np.zeros(x_chunk.shape[0])
    f_star_values = np.asarray(f_star_values, dtype=float).ravel()
    idx = np.flatnonzero(live)
    delta = f_star_values[None, :] - mu_M[idx, None]
    h_bound = bounded_entropy_core(
        delta, var_eff[idx, None], var_M[idx, None], cov[idx, None], quad
    ).mean(axis=1)
    h_marginal = 0.5 * (_LOG_2PIE + np.log(var_eff[idx]))
    gains = np.zeros(x_chunk.shape[0])
    gains[idx] = h_marginal - h_bound
    return gains


def info_gain(model, x, m, f_star_values, quad=QuadratureSpec(), noisy=False):
    """Mean information gain (nats) of one query about the optimum value.

    Not divided by cost.  Candidates with (numerically) zero residual
    variance are defined to carry zero gain.
    """
    x = check_points(x, d=model.hyperparams.n_dims)
    if x.shape[0] != 1:
        raise InputError("info_gain expects a single input row")
    f_star_values = np.asarray(f_star_values, dtype=float).ravel()
    if f_star_values.size == 0:
        raise InputError("f_star_values must be nonempty")
    m = int(m)
    if not 1 <= m <= model.hyperparams.n_fidelities:
        raise InputError(f"fidelity {m} outside 1..{model.hyperparams.n_fidelities}")
    return float(_gains_for_chunk(model, x, m, f_star_values, quad, noisy)[0])


def score_candidates(
    model, candidates, f_star_values, costs, quad=QuadratureSpec(), noisy=False
):
    """Cost-normalized scores for every (fidelity, candidate) pair.

    Returns an (M, n_candidates) array; candidates are scored in chunks so
    pool size is limited by memory only through one chunk at a time.
    """
    candidates = check_points(candidates, d=model.hyperparams.n_dims, name="candidates")
    if candidates.shape[0] == 0:
        raise InputError("candidates must be nonempty")
    f_star_values = np.asarray(f_star_values, dtype=float).ravel()
    if f_star_values.size == 0:
        raise InputError("f_star_values must be nonempty")
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
                _gains_for_chunk(model, chunk, m, f_star_values, quad, noisy) / lam
            )
    return scores


def argmax_score(scores):
    """Flat argmax of an (M, n) score table.

    Row-major order makes ties resolve to the lowest fidelity first, then the
    lowest candidate index.
    """
    flat = int(np.argmax(scores))
    m, idx = divmod(flat, scores.shape[1])
    return m + 1, idx


def select_next(
    model,
    candidates,
    f_star_values,
    costs,
    quad=QuadratureSpec(),
    noisy=False,
    keep_scores=True,
):
    """Argmax of info_gain / cost over all (candidate, fidelity) pairs."""
    candidates = check_points(candidates, d=model.hyperparams.n_dims, name="candidates")
    scores = score_candidates(model, candidates, f_star_values, costs, quad, noisy)
    m, idx = argmax_score(scores)
    return AcquisitionResult(
        index=idx,
        fidelity=m,
        x=candidates[idx].copy(),
        value=float(scores[m - 1, idx]),
        scores=scores if keep_scores else None,
    )


def run_sequential(objective, config, seed=None):
    """One-worker optimization loop; returns the regret trace for one seed.

    Each iteration regenerates the sampled optimum values, picks the
    (candidate, fidelity) argmax of information gain per cost, pays the
    query's cost in simulated time, and logs the observation.  ``seed``
    defaults to the first entry of ``config.seeds``.
    """
    from . import engine

    return engine.run_sequential_loop(objective, config, seed=seed)


def wall_clock_ms():
    """Monotonic milliseconds for optional per-row timing."""
    return time.perf_counter() * 1e3
