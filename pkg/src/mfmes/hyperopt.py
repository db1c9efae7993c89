"""Marginal-likelihood hyperparameter search for the latent-factor kernel.

Lengthscales and independent-component scales are searched in log space,
mixing weights linearly (they may be negative).  The search is a bounded
multi-start Nelder-Mead: deterministic given the seed, and the returned
parameters are never worse than any evaluated start point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import InputError
from .gp import slfm_log_marginal_likelihood
from .kernels import SlfmHyperparams

__all__ = ["HyperparamBounds", "default_bounds", "optimize_hyperparams"]


@dataclass(frozen=True)
class HyperparamBounds:
    """Box bounds in natural parameter space, one array per block."""

    lengthscale_lo: np.ndarray  # (C, d)
    lengthscale_hi: np.ndarray
    weight_lo: np.ndarray       # (C, M)
    weight_hi: np.ndarray
    kappa_lo: np.ndarray        # (C, M)
    kappa_hi: np.ndarray

    def __post_init__(self):
        for lo, hi in (
            (self.lengthscale_lo, self.lengthscale_hi),
            (self.weight_lo, self.weight_hi),
            (self.kappa_lo, self.kappa_hi),
        ):
            if np.asarray(lo).shape != np.asarray(hi).shape or np.any(lo > hi):
                raise InputError("bounds must be matching arrays with lo <= hi")
        if np.any(self.lengthscale_lo <= 0) or np.any(self.kappa_lo <= 0):
            raise InputError("lengthscale and kappa bounds must be positive")


def default_bounds(domain_widths, n_latent, n_fidelities):
    """Bounds used by the experiment harness.

    Lengthscales span [width/10, width*10] per input dimension; first-fidelity
    weights are anchored in [sqrt(0.75), 1]; higher-fidelity weights span
    [-sqrt(0.25), sqrt(0.25)]; kappas span [1e-3, 1e-1].
    """
    widths = np.asarray(domain_widths, dtype=float)
    if widths.ndim != 1 or np.any(widths <= 0):
        raise InputError("domain_widths must be a positive 1-d array")
    C, M = int(n_latent), int(n_fidelities)
    ls_lo = np.tile(widths / 10.0, (C, 1))
    ls_hi = np.tile(widths * 10.0, (C, 1))
    w_lo = np.full((C, M), -np.sqrt(0.25))
    w_hi = np.full((C, M), np.sqrt(0.25))
    w_lo[:, 0] = np.sqrt(0.75)
    w_hi[:, 0] = 1.0
    kap_lo = np.full((C, M), 1e-3)
    kap_hi = np.full((C, M), 1e-1)
    return HyperparamBounds(ls_lo, ls_hi, w_lo, w_hi, kap_lo, kap_hi)


def _pack(params, bounds):
    """Natural parameters -> search vector (logs for positive blocks)."""
    return np.concatenate([
        np.log(params.lengthscales).ravel(),
        params.weights.ravel(),
        np.log(params.kappas).ravel(),
    ])


def _unpack(t, bounds, noise_variance):
    C, d = bounds.lengthscale_lo.shape
    M = bounds.weight_lo.shape[1]
    ls = np.exp(t[: C * d]).reshape(C, d)
    w = t[C * d : C * d + C * M].reshape(C, M)
    kap = np.exp(t[C * d + C * M :]).reshape(C, M)
    return SlfmHyperparams(ls, w, kap, noise_variance=noise_variance)


def _search_box(bounds):
    lo = np.concatenate([
        np.log(bounds.lengthscale_lo).ravel(),
        bounds.weight_lo.ravel(),
        np.log(bounds.kappa_lo).ravel(),
    ])
    hi = np.concatenate([
        np.log(bounds.lengthscale_hi).ravel(),
        bounds.weight_hi.ravel(),
        np.log(bounds.kappa_hi).ravel(),
    ])
    return lo, hi


def optimize_hyperparams(
    x,
    m,
    y,
    bounds,
    budget=60,
    n_starts=8,
    seed=0,
    noise_variance=1e-6,
):
    """Maximize the log marginal likelihood inside box bounds.

    budget : max objective evaluations per start (0 evaluates only the start
    points and returns the best).  Deterministic given the seed.
    """
    lo, hi = _search_box(bounds)
    if np.any(lo > hi):
        raise InputError("empty search box")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))
    starts = [0.5 * (lo + hi)]
    for _ in range(max(int(n_starts) - 1, 0)):
        starts.append(lo + (hi - lo) * rng.uniform(size=lo.shape))

    def neg_lml(t):
        params = _unpack(np.clip(t, lo, hi), bounds, noise_variance)
        try:
            return -slfm_log_marginal_likelihood(params, x, m, y)
        except Exception:
            return 1e12

    best_t, best_v = None, np.inf
    for t0 in starts:
        v0 = neg_lml(t0)
        if v0 < best_v:
            best_t, best_v = t0, v0
        if budget and budget > 0:
            res = minimize(
                neg_lml,
                t0,
                method="Nelder-Mead",
                bounds=list(zip(lo, hi)),
                options={"maxfev": int(budget), "xatol": 1e-4, "fatol": 1e-6},
            )
            if res.fun < best_v:
                best_t, best_v = np.clip(res.x, lo, hi), res.fun
    return _unpack(best_t, bounds, noise_variance)
