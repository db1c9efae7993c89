"""Multi-fidelity benchmark objectives, initialization, and regret metrics.

Each benchmark exposes every fidelity of one underlying task: analytic test
functions with mutated low-fidelity coefficients, prior draws from the
multi-fidelity kernel itself, and a pooled-candidate variant standing in for
a precomputed simulation grid.  The framework maximizes the top fidelity, so
conventionally-minimized functions are negated by default and each
objective's optimum handle is computed by a dense search plus local polish
rather than taken from the literature.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import Bounds, minimize
from scipy.stats import qmc

from .acquisition import CostVector
from .errors import InputError
from .kernels import SlfmHyperparams
from .streams import child_seed
from .trace import FLAG_ERROR, FLAG_INIT
from .validation import check_fidelities, check_points

__all__ = [
    "MultiFidelityObjective",
    "styblinski_tang",
    "hartmann6",
    "make_objective",
    "list_benchmarks",
    "latin_hypercube_init",
    "simple_regret",
    "inference_regret",
]


# -- raw benchmark formulas ----------------------------------------------------


def _as_batch(x, d):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = check_points(x, d=d)
    return x, single


def styblinski_tang(x, m):
    """Two-fidelity Styblinski-Tang on [-5, 5]^2 (raw, minimization form).

    Fidelity 2 is the standard function 0.5 * sum(x^4 - 16 x^2 + 5 x); the
    cheap fidelity perturbs the coefficients to 0.9 / -15 / +6.
    """
    x, single = _as_batch(x, 2)
    if np.any(x < -5.0 - 1e-12) or np.any(x > 5.0 + 1e-12):
        raise InputError("styblinski_tang inputs must lie in [-5, 5]^2")
    m = int(m)
    if m == 1:
        vals = 0.5 * np.sum(0.9 * x**4 - 15.0 * x**2 + 6.0 * x, axis=1)
    elif m == 2:
        vals = 0.5 * np.sum(x**4 - 16.0 * x**2 + 5.0 * x, axis=1)
    else:
        raise InputError("styblinski_tang has fidelities 1 and 2")
    return float(vals[0]) if single else vals


_HARTMANN_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
_HARTMANN_SHIFT = {1: 0.2, 2: 0.1, 3: 0.0}
_HARTMANN_A = np.array(
    [
        [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
        [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
        [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
        [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
    ]
)
_HARTMANN_P = 1e-4 * np.array(
    [
        [1312.0, 1696.0, 5569.0, 124.0, 8283.0, 5886.0],
        [2329.0, 4135.0, 8307.0, 3736.0, 1004.0, 9991.0],
        [2348.0, 1451.0, 3522.0, 2883.0, 3047.0, 6650.0],
        [4047.0, 8828.0, 8732.0, 5743.0, 1091.0, 381.0],
    ]
)


def hartmann6(x, m):
    """Three-fidelity Hartmann6 on [0, 1]^6 (raw, minimization form).

    f^(m) = -sum_i (alpha_i - delta_m) exp(-sum_j A_ij (x_j - P_ij)^2) with
    delta = 0.2, 0.1, 0 for m = 1, 2, 3.
    """
    x, single = _as_batch(x, 6)
    if np.any(x < -1e-12) or np.any(x > 1.0 + 1e-12):
        raise InputError("hartmann6 inputs must lie in [0, 1]^6")
    m = int(m)
    if m not in _HARTMANN_SHIFT:
        raise InputError("hartmann6 has fidelities 1..3")
    coeff = _HARTMANN_ALPHA - _HARTMANN_SHIFT[m]
    vals = np.zeros(x.shape[0])
    for i in range(4):
        expo = np.sum(_HARTMANN_A[i] * (x - _HARTMANN_P[i]) ** 2, axis=1)
        vals -= coeff[i] * np.exp(-expo)
    return float(vals[0]) if single else vals


# -- objective container -------------------------------------------------------


@dataclass(frozen=True)
class MultiFidelityObjective:
    """A maximization target exposed at fidelities 1..M."""

    name: str
    d: int
    n_fidelities: int
    bounds: np.ndarray            # (d, 2)
    costs: CostVector
    init_counts: tuple            # initial design size per fidelity
    optimum_value: float
    optimum_x: np.ndarray
    fn: callable = field(repr=False)   # (x batch, m) -> values, maximization scale
    pool: np.ndarray | None = None     # fixed candidate set, or None (continuous)
    fixed_hyperparams: SlfmHyperparams | None = None

    def evaluate(self, x, m):
        """Objective value(s) at fidelity m; scalar for a single 1-d input."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x = check_points(x, d=self.d)
        self._check_bounds(x)
        m = int(m)
        check_fidelities(m, n_fidelities=self.n_fidelities)
        vals = np.asarray(self.fn(x, m), dtype=float)
        return float(vals[0]) if single else vals

    def evaluate_rows(self, x, m):
        """Values for rows of x with a per-row fidelity vector."""
        x = check_points(x, d=self.d)
        self._check_bounds(x)
        m = check_fidelities(m, n=x.shape[0], n_fidelities=self.n_fidelities)
        out = np.empty(x.shape[0])
        for fid in np.unique(m):
            mask = m == fid
            out[mask] = np.asarray(self.fn(x[mask], int(fid)), dtype=float)
        return out

    def _check_bounds(self, x):
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        if np.any(x < lo - 1e-12) or np.any(x > hi + 1e-12):
            raise InputError(f"input outside the domain of {self.name}")


def _polish_maximum(fn, x0, bounds, maxfev=500):
    """Local simplex refinement of a dense-search maximizer."""
    res = minimize(
        lambda z: -fn(z[None, :])[0],
        x0=np.asarray(x0, dtype=float),
        method="Nelder-Mead",
        bounds=Bounds(bounds[:, 0], bounds[:, 1]),
        options={"maxfev": maxfev, "xatol": 1e-10, "fatol": 1e-12},
    )
    return (res.x, -res.fun) if -res.fun > fn(np.asarray(x0)[None, :])[0] else (
        np.asarray(x0, dtype=float),
        float(fn(np.asarray(x0)[None, :])[0]),
    )


# -- factories -----------------------------------------------------------------


@lru_cache(maxsize=None)
def _styblinski_tang_objective(single_fidelity):
    bounds = np.array([[-5.0, 5.0], [-5.0, 5.0]])

    def top(x, m):
        return -styblinski_tang(x, 2)

    grid_1d = np.linspace(-5.0, 5.0, 1001)
    gx, gy = np.meshgrid(grid_1d, grid_1d, indexing="ij")
    grid = np.column_stack([gx.ravel(), gy.ravel()])
    vals = top(grid, 2)
    best = int(np.argmax(vals))
    opt_x, opt_val = _polish_maximum(lambda z: top(z, 2), grid[best], bounds)

    if single_fidelity:
        return MultiFidelityObjective(
            name="styblinski-tang-single",
            d=2,
            n_fidelities=1,
            bounds=bounds,
            costs=CostVector(np.array([5.0])),
            init_counts=(10,),
            optimum_value=float(opt_val),
            optimum_x=opt_x,
            fn=lambda x, m: -styblinski_tang(x, 2),
        )
    return MultiFidelityObjective(
        name="styblinski-tang",
        d=2,
        n_fidelities=2,
        bounds=bounds,
        costs=CostVector(np.array([1.0, 5.0])),
        init_counts=(10, 8),
        optimum_value=float(opt_val),
        optimum_x=opt_x,
        fn=lambda x, m: -styblinski_tang(x, m),
    )


@lru_cache(maxsize=None)
def _hartmann6_objective():
    bounds = np.column_stack([np.zeros(6), np.ones(6)])

    def top(x):
        return -hartmann6(x, 3)

    sobol = qmc.Sobol(d=6, scramble=False)
    best_val, best_x = -np.inf, None
    for _ in range(8):
        chunk = sobol.random(2**17)
        vals = top(chunk)
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val, best_x = float(vals[i]), chunk[i]
    opt_x, opt_val = _polish_maximum(top, best_x, bounds)
    return MultiFidelityObjective(
        name="hartmann6",
        d=6,
        n_fidelities=3,
        bounds=bounds,
        costs=CostVector(np.array([1.0, 3.0, 5.0])),
        init_counts=(36, 18, 12),
        optimum_value=float(opt_val),
        optimum_x=opt_x,
        fn=lambda x, m: -hartmann6(x, m),
    )


def _draw_prior_function(params, seed, n_bases=1000):
    """A deterministic function drawn from the kernel's prior via features."""
    from .rfm import build_feature_map

    root = child_seed(seed, "benchmark-fn")
    fmap_seed, weight_seed = root.spawn(2)
    fmap = build_feature_map(params, n_bases, fmap_seed)
    w = np.random.Generator(np.random.PCG64(weight_seed)).standard_normal(
        fmap.n_features
    )

    def fn(x, m):
        return fmap.features(x, int(m)) @ w

    return fn


@lru_cache(maxsize=None)
def _gp_synthetic_objective(seed):
    d = 3
    params = SlfmHyperparams(
        lengthscales=np.full((1, d), 0.1),
        weights=np.array([[0.9, 0.9]]),
        kappas=np.array([[0.1, 0.1]]),
        noise_variance=1e-6,
    )
    fn = _draw_prior_function(params, seed)
    bounds = np.column_stack([np.zeros(d), np.ones(d)])
    cand = qmc.Sobol(d=d, scramble=False).random(4096)
    vals = fn(cand, 2)
    best = int(np.argmax(vals))
    opt_x, opt_val = _polish_maximum(lambda z: fn(z, 2), cand[best], bounds)
    return MultiFidelityObjective(
        name="gp-synthetic",
        d=d,
        n_fidelities=2,
        bounds=bounds,
        costs=CostVector(np.array([1.0, 5.0])),
        init_counts=(15, 12),
        optimum_value=float(opt_val),
        optimum_x=opt_x,
        fn=fn,
        fixed_hyperparams=params,
    )


@lru_cache(maxsize=None)
def _materials_objective(seed):
    # Stand-in for a precomputed simulation grid: a kernel-prior draw on a
    # fixed 250x250 candidate pool with three fidelities and heavy top cost.
    d = 2
    params = SlfmHyperparams(
        lengthscales=np.full((1, d), 0.1),
        weights=np.array([[0.9, 0.9, 0.9]]),
        kappas=np.array([[0.1, 0.1, 0.1]]),
        noise_variance=1e-6,
    )
    fn = _draw_prior_function(params, seed)
    axis = np.linspace(0.0, 1.0, 250)
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    pool = np.column_stack([gx.ravel(), gy.ravel()])
    vals = fn(pool, 3)
    best = int(np.argmax(vals))
    return MultiFidelityObjective(
        name="materials",
        d=d,
        n_fidelities=3,
        bounds=np.column_stack([np.zeros(d), np.ones(d)]),
        costs=CostVector(np.array([5.0, 10.0, 60.0])),
        init_counts=(20, 14, 6),
        optimum_value=float(vals[best]),
        optimum_x=pool[best].copy(),
        fn=fn,
        pool=pool,
    )


_REGISTRY = {
    "styblinski-tang": lambda seed: _styblinski_tang_objective(False),
    "styblinski-tang-single": lambda seed: _styblinski_tang_objective(True),
    "hartmann6": lambda seed: _hartmann6_objective(),
    "gp-synthetic": _gp_synthetic_objective,
    "materials": _materials_objective,
}


def make_objective(name, seed=0):
    """Construct a registered benchmark; ``seed`` fixes generated objectives."""
    if name not in _REGISTRY:
        known = ", ".join(sorted(_REGISTRY))
        raise InputError(f"unknown benchmark {name!r}; known: {known}")
    return _REGISTRY[name](int(seed))


def list_benchmarks():
    """Name and shape of every registered benchmark."""
    out = []
    for name in sorted(_REGISTRY):
        obj = _REGISTRY[name](0)
        out.append(
            {
                "name": name,
                "d": obj.d,
                "fidelities": obj.n_fidelities,
                "costs": [float(c) for c in obj.costs.values],
                "pooled": obj.pool is not None,
            }
        )
    return out


# -- initialization ------------------------------------------------------------


def _as_generator(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def latin_hypercube_init(objective, seed):
    """Stratified initial design; returns (X, fidelities, y).

    One Latin hypercube per fidelity, sizes from the objective's init_counts.
    On pooled objectives each point snaps to the nearest unused pool entry.
    """
    rng = _as_generator(seed)
    used = np.zeros(
        objective.pool.shape[0] if objective.pool is not None else 0, dtype=bool
    )
    xs, ms = [], []
    for fid, count in enumerate(objective.init_counts, start=1):
        if int(count) == 0:
            continue
        sampler = qmc.LatinHypercube(d=objective.d, seed=rng)
        pts = qmc.scale(
            sampler.random(int(count)),
            objective.bounds[:, 0],
            objective.bounds[:, 1],
        )
        if objective.pool is not None:
            snapped = np.empty_like(pts)
            for i, p in enumerate(pts):
                dist = np.sum((objective.pool - p) ** 2, axis=1)
                dist[used] = np.inf
                j = int(np.argmin(dist))
                used[j] = True
                snapped[i] = objective.pool[j]
            pts = snapped
        xs.append(pts)
        ms.append(np.full(int(count), fid))
    X = np.vstack(xs)
    m = np.concatenate(ms)
    y = objective.evaluate_rows(X, m)
    return X, m, y


# -- regret metrics ------------------------------------------------------------


def simple_regret(trace, objective):
    """Recompute the simple-regret column from a trace's raw columns.

    Initialization rows are one simultaneous event and share the best
    top-fidelity value of the whole block; later rows track the running best,
    so the series is nonincreasing.  Failed rows contribute nothing.
    """
    cols = trace.to_arrays()
    M = objective.n_fidelities
    opt = objective.optimum_value
    ok = (cols["flags"] != FLAG_ERROR) & np.isfinite(cols["y"]) & (
        cols["fidelity"] == M
    )
    is_init = cols["flags"] == FLAG_INIT
    init_best = (
        np.max(cols["y"][ok & is_init]) if np.any(ok & is_init) else -np.inf
    )
    out = np.empty(len(trace))
    best = init_best
    for r in range(len(trace)):
        if is_init[r]:
            out[r] = opt - init_best
            continue
        if ok[r]:
            best = max(best, cols["y"][r])
        out[r] = opt - best
    return out


def inference_regret(trace, recommendations, objective):
    """Regret of per-row model recommendations, clipped to simple regret.

    ``recommendations`` holds one top-fidelity input per trace row (the
    posterior-mean argmax recorded when the row was logged).
    """
    recommendations = check_points(recommendations, d=objective.d)
    if recommendations.shape[0] != len(trace):
        raise InputError("one recommendation per trace row required")
    M = objective.n_fidelities
    raw = objective.optimum_value - objective.evaluate_rows(
        recommendations, np.full(len(trace), M)
    )
    sr = np.asarray(trace.simple_regret, dtype=float)
    return np.minimum(raw, sr)
