"""Run loops shared by the sequential and asynchronous optimizers.

A RunState bundles the benchmark, the fitted model, feature-map caches, and
the growing regret trace.  Sequential runs are a plain query loop; parallel
runs are a discrete-event simulation over q workers where evaluating fidelity
m occupies a worker for cost_m simulated time units.  Both modes share the
same decision primitive and the same labeled RNG streams, so a one-worker
simulation reproduces the sequential trace byte for byte.

Per-run child streams (root = run seed): "lhs-init" for the initial design,
"pool" for the candidate set, "hyperopt:<ver>" and "rfm-freq:<ver>" per model
refit, and "weights:<k>" per decision.  Labels keep the streams independent
of call order, so adding a consumer never shifts another stream.
"""

from __future__ import annotations

import heapq
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import qmc

from .acquisition import argmax_score, score_candidates, wall_clock_ms
from .benchmarks import latin_hypercube_init
from .gp import MultiFidelityGP
from .hyperopt import default_bounds, optimize_hyperparams
from .parallel import score_candidates_pending
from .rfm import build_feature_map, sample_max_values_gumbel, sample_weight_matrix
from .streams import child_rng, child_seed
from .trace import FLAG_ERROR, FLAG_INIT, RegretTrace
from .validation import augment

__all__ = ["RunState", "start_run", "run_sequential_loop", "run_async_loop"]

# Candidate feature matrices are cached only below this entry count; the
# materials pool at D=1000 would otherwise hold gigabytes.
_PHI_CACHE_MAX = 8_000_000
_CAND_CHUNK = 4096
# Slack when testing whether a query still fits inside the time budget.
_TIME_EPS = 1e-9


@dataclass
class RunState:
    """Mutable state of one seeded run."""

    objective: object
    config: object
    seed: int
    costs: object
    candidates: np.ndarray
    normalize_y: bool
    trace: RegretTrace
    train_x: np.ndarray
    train_m: np.ndarray
    train_y: np.ndarray
    params: object = None
    model: MultiFidelityGP = None
    fmap: object = None
    phi_train: np.ndarray = None
    gram: np.ndarray = None
    phi_cand: np.ndarray = None
    refit_version: int = 0
    last_bucket: int = 0
    n_decisions: int = 0
    n_ingested: int = 0
    best_f: float = -np.inf
    event_index: int = 0


def _build_candidates(objective, config, seed):
    """Acquisition candidate set: the benchmark pool, or a seeded Sobol' set."""
    if objective.pool is not None:
        return objective.pool
    sampler = qmc.Sobol(d=objective.d, scramble=True, seed=child_rng(seed, "pool"))
    n = int(config.n_candidates)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # balance warning on non-power-of-two n
        k = n.bit_length() - 1
        pts = sampler.random_base2(k) if (1 << k) == n else sampler.random(n)
    return qmc.scale(pts, objective.bounds[:, 0], objective.bounds[:, 1])


def _needs_fmap(state):
    return state.config.fstar_method == "rfm"


def _fit_gp(state):
    """Refactorize the GP on all ingested rows under the current params."""
    X = augment(state.train_x, state.train_m)
    state.model = MultiFidelityGP(
        hyperparams=state.params, normalize_y=state.normalize_y
    ).fit(X, state.train_y)


def _do_refit(state):
    """Re-estimate hyperparameters, refit, and rebuild feature caches."""
    ver = state.refit_version
    obj, cfg = state.objective, state.config
    if obj.fixed_hyperparams is not None:
        state.params = obj.fixed_hyperparams
    else:
        widths = obj.bounds[:, 1] - obj.bounds[:, 0]
        bounds = default_bounds(widths, cfg.n_latent, obj.n_fidelities)
        if cfg.lengthscale_bounds is not None:
            lo, hi = cfg.lengthscale_bounds
            bounds = replace(
                bounds,
                lengthscale_lo=np.full_like(bounds.lengthscale_lo, lo),
                lengthscale_hi=np.full_like(bounds.lengthscale_hi, hi),
            )
        mu = float(np.mean(state.train_y))
        sd = float(np.std(state.train_y)) or 1.0
        hseed = int(
            child_seed(state.seed, f"hyperopt:{ver}").generate_state(1, np.uint64)[0]
        )
        state.params = optimize_hyperparams(
            state.train_x,
            state.train_m,
            (state.train_y - mu) / sd,
            bounds,
            budget=cfg.hyperopt_budget,
            n_starts=cfg.hyperopt_starts,
            seed=hseed,
            noise_variance=cfg.noise_variance,
        )
    _fit_gp(state)
    if _needs_fmap(state):
        state.fmap = build_feature_map(
            state.params, cfg.n_bases, child_seed(state.seed, f"rfm-freq:{ver}")
        )
        state.phi_train = state.fmap.features_rows(state.train_x, state.train_m)
        state.gram = state.phi_train @ state.phi_train.T
        n_entries = state.candidates.shape[0] * state.fmap.n_features
        state.phi_cand = (
            state.fmap.features(state.candidates, obj.n_fidelities)
            if n_entries <= _PHI_CACHE_MAX
            else None
        )
    state.refit_version = ver + 1


def _ingest(state, x, m, y):
    """Add one observation, refactorize, and extend the feature caches."""
    state.train_x = np.vstack([state.train_x, np.asarray(x, dtype=float)[None, :]])
    state.train_m = np.append(state.train_m, int(m))
    state.train_y = np.append(state.train_y, float(y))
    _fit_gp(state)
    if state.fmap is not None:
        phi_new = state.fmap.features_rows(
            state.train_x[-1:], state.train_m[-1:]
        )
        cross = state.phi_train @ phi_new.T
        state.gram = np.block(
            [[state.gram, cross], [cross.T, phi_new @ phi_new.T]]
        )
        state.phi_train = np.vstack([state.phi_train, phi_new])
    state.n_ingested += 1


def _maybe_refit(state):
    """Refit when the ingested-observation count crosses a cadence boundary."""
    bucket = state.n_ingested // state.config.refit_every
    if bucket > state.last_bucket:
        state.last_bucket = bucket
        _do_refit(state)


def _sample_decision_draws(state, k, pending_x, pending_m):
    """Optimum-value samples (and pending-value draws) for decision k."""
    cfg = state.config
    if cfg.fstar_method == "gumbel":
        f_star = sample_max_values_gumbel(
            state.model,
            state.candidates,
            cfg.n_fstar,
            child_seed(state.seed, f"weights:{k}"),
        )
        return f_star, None
    rng = child_rng(state.seed, f"weights:{k}")
    W = sample_weight_matrix(
        state.model,
        state.fmap,
        rng,
        cfg.n_fstar,
        phi_train=state.phi_train,
        gram=state.gram,
    )
    M = state.objective.n_fidelities
    if state.phi_cand is not None:
        best = (state.phi_cand @ W.T).max(axis=0)
    else:
        best = np.full(cfg.n_fstar, -np.inf)
        for lo in range(0, state.candidates.shape[0], _CAND_CHUNK):
            chunk = state.candidates[lo : lo + _CAND_CHUNK]
            vals = state.fmap.features(chunk, M) @ W.T
            best = np.maximum(best, vals.max(axis=0))
    f_star = state.model.y_mean_ + state.model.y_std_ * best
    f_q = None
    if pending_x is not None and len(pending_x):
        phi_p = state.fmap.features_rows(pending_x, pending_m)
        f_q = state.model.y_mean_ + state.model.y_std_ * (W @ phi_p.T)
    return f_star, f_q


def _decide(state, pending_x=None, pending_m=None):
    """Pick the next (fidelity, candidate) pair; returns (m, index, score)."""
    cfg = state.config
    k = state.n_decisions
    state.n_decisions = k + 1
    f_star, f_q = _sample_decision_draws(state, k, pending_x, pending_m)
    if pending_x is None or len(pending_x) == 0:
        scores = score_candidates(
            state.model,
            state.candidates,
            f_star,
            state.costs,
            quad=cfg.quad,
            noisy=cfg.noisy_gain,
        )
    else:
        scores = score_candidates_pending(
            state.model,
            state.candidates,
            pending_x,
            pending_m,
            f_star,
            f_q,
            state.costs,
            quad=cfg.quad,
        )
    m, idx = argmax_score(scores)
    return m, idx, float(scores[m - 1, idx])


def _recommend(state):
    """Posterior-mean argmax over the candidate set at the top fidelity."""
    mu, _ = state.model.predict_moments(
        state.candidates, state.objective.n_fidelities
    )
    return state.candidates[int(np.argmax(mu))]


def _inference_regret(state, sr):
    x_hat = _recommend(state)
    raw = state.objective.optimum_value - float(
        state.objective.evaluate(x_hat, state.objective.n_fidelities)
    )
    return min(raw, sr)


def _evaluate(objective, x, m):
    """Query the benchmark; a failure yields (nan, False) and is not ingested."""
    try:
        y = float(objective.evaluate(x, int(m)))
    except Exception:
        return float("nan"), False
    if not np.isfinite(y):
        return float("nan"), False
    return y, True


def start_run(objective, config, seed):
    """Evaluate the initial design, fit the first model, log the init block."""
    seed = int(seed)
    x0, m0, y0 = latin_hypercube_init(objective, child_seed(seed, "lhs-init"))
    state = RunState(
        objective=objective,
        config=config,
        seed=seed,
        costs=objective.costs,
        candidates=_build_candidates(objective, config, seed),
        normalize_y=objective.fixed_hyperparams is None,
        trace=RegretTrace(seed=seed, d=objective.d),
        train_x=x0,
        train_m=m0,
        train_y=y0,
    )
    M = objective.n_fidelities
    at_top = m0 == M
    state.best_f = float(np.max(y0[at_top])) if np.any(at_top) else -np.inf
    state.n_ingested = 0  # cadence counts post-init observations only
    _do_refit(state)
    sr = objective.optimum_value - state.best_f
    ir = _inference_regret(state, sr)
    # The whole design is one simultaneous event at t=0 with no query cost.
    for i in range(x0.shape[0]):
        state.trace.append(
            event_index=state.event_index,
            sim_time=0.0,
            cumulative_cost=0.0,
            fidelity=int(m0[i]),
            x=x0[i],
            y=float(y0[i]),
            simple_regret=sr,
            inference_regret=ir,
            acq_value=float("nan"),
            wall_ms=0.0,
            flags=FLAG_INIT,
        )
        state.event_index += 1
    return state


def _record_completion(state, sim_time, cum_cost, m, x, y, ok, acq_value, wall):
    """Ingest one finished query, update the model, and log its trace row."""
    if ok:
        _ingest(state, x, m, y)
        if m == state.objective.n_fidelities and y > state.best_f:
            state.best_f = y
        _maybe_refit(state)
    sr = state.objective.optimum_value - state.best_f
    ir = _inference_regret(state, sr)
    state.trace.append(
        event_index=state.event_index,
        sim_time=sim_time,
        cumulative_cost=cum_cost,
        fidelity=int(m),
        x=x,
        y=y,
        simple_regret=sr,
        inference_regret=ir,
        acq_value=acq_value,
        wall_ms=wall,
        flags="" if ok else FLAG_ERROR,
    )
    state.event_index += 1


def _iteration_cap(config):
    return config.max_iterations if config.max_iterations is not None else np.inf


def _fits_budget(config, start_time, lam):
    """A query may be dispatched only if it completes inside the horizon."""
    if config.budget is None:
        return True
    return start_time + lam <= config.budget + _TIME_EPS


def run_sequential_loop(objective, config, seed=None):
    """One-worker loop: decide, pay the cost in simulated time, observe."""
    seed = int(config.seeds[0] if seed is None else seed)
    state = start_run(objective, config, seed)
    now = 0.0
    n_dispatched = 0
    while n_dispatched < _iteration_cap(config):
        t0 = wall_clock_ms() if config.record_wall_time else 0.0
        m, idx, value = _decide(state)
        wall = wall_clock_ms() - t0 if config.record_wall_time else 0.0
        lam = state.costs.of(m)
        if not _fits_budget(config, now, lam):
            break
        x = state.candidates[idx]
        y, ok = _evaluate(objective, x, m)
        now += lam
        n_dispatched += 1
        _record_completion(state, now, now, m, x, y, ok, value, wall)
    return state.trace


def run_async_loop(objective, config, seed=None):
    """Discrete-event simulation of q workers sharing one model.

    Each dispatch conditions the acquisition on every in-flight query.
    Completions are processed in (time, dispatch order); the freed worker is
    immediately redispatched unless the budget or iteration cap forbids it.
    """
    seed = int(config.seeds[0] if seed is None else seed)
    state = start_run(objective, config, seed)
    cap = _iteration_cap(config)
    heap = []  # (completion_time, dispatch_seq, m, x, y, ok, score, wall)
    pending = {}  # dispatch_seq -> (x, m)
    n_dispatched = 0
    cum_cost = 0.0

    def dispatch(now):
        nonlocal n_dispatched
        if n_dispatched >= cap:
            return
        if pending:
            order = sorted(pending)
            p_x = np.vstack([pending[s][0] for s in order])
            p_m = np.asarray([pending[s][1] for s in order], dtype=int)
        else:
            p_x = p_m = None
        t0 = wall_clock_ms() if config.record_wall_time else 0.0
        m, idx, value = _decide(state, p_x, p_m)
        wall = wall_clock_ms() - t0 if config.record_wall_time else 0.0
        lam = state.costs.of(m)
        if not _fits_budget(config, now, lam):
            return  # this worker retires
        x = state.candidates[idx]
        y, ok = _evaluate(objective, x, m)
        seq = n_dispatched
        n_dispatched += 1
        pending[seq] = (np.asarray(x, dtype=float), int(m))
        heapq.heappush(heap, (now + lam, seq, int(m), x, y, ok, value, wall))

    for _ in range(int(config.q)):
        dispatch(0.0)
    while heap:
        now, seq, m, x, y, ok, value, wall = heapq.heappop(heap)
        del pending[seq]
        cum_cost += state.costs.of(m)
        _record_completion(state, now, cum_cost, m, x, y, ok, value, wall)
        dispatch(now)
    return state.trace
