"""Shared builders for the test suite.

The straight-line kernel below re-derives the latent-factor kernel with
scalar loops and its own constant handling, so Gram-based oracles in other
files do not share code paths with the implementation under test.
"""

import math

import numpy as np
import pytest

from mfmes.gp import MultiFidelityGP
from mfmes.kernels import SlfmHyperparams
from mfmes.validation import augment


def straight_line_kernel(params, x1, m1, x2, m2):
    """Scalar-loop latent-factor kernel value for a single pair of points."""
    total = 0.0
    for c in range(params.n_latent):
        sq = 0.0
        for i in range(params.n_dims):
            diff = float(x1[i]) - float(x2[i])
            ell = float(params.lengthscales[c, i])
            sq += diff * diff / (2.0 * ell * ell)
        k_c = math.exp(-sq)
        w1 = float(params.weights[c, m1 - 1])
        w2 = float(params.weights[c, m2 - 1])
        coef = w1 * w2
        if m1 == m2:
            coef += float(params.kappas[c, m1 - 1])
        total += coef * k_c
    return total


def straight_line_gram(params, x, m):
    n = x.shape[0]
    K = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            K[i, j] = straight_line_kernel(params, x[i], int(m[i]), x[j], int(m[j]))
    return K


def make_params(seed=0, d=2, M=2, C=2, noise_variance=1e-6):
    """Random in-bounds hyperparameters on the unit cube."""
    rng = np.random.default_rng(seed)
    ell = rng.uniform(0.2, 0.8, size=(C, d))
    w = np.empty((C, M))
    w[:, 0] = rng.uniform(math.sqrt(0.75), 1.0, size=C)
    if M > 1:
        w[:, 1:] = rng.uniform(-math.sqrt(0.25), math.sqrt(0.25), size=(C, M - 1))
    kap = rng.uniform(1e-3, 1e-1, size=(C, M))
    return SlfmHyperparams(
        lengthscales=ell, weights=w, kappas=kap, noise_variance=noise_variance
    )


def make_dataset(params, n=12, seed=0):
    """Random inputs/fidelities and targets drawn from the model's prior."""
    rng = np.random.default_rng(seed + 1000)
    d, M = params.n_dims, params.n_fidelities
    x = rng.uniform(0.0, 1.0, size=(n, d))
    m = rng.integers(1, M + 1, size=n)
    K = straight_line_gram(params, x, m)
    y = rng.multivariate_normal(np.zeros(n), K + params.noise_variance * np.eye(n))
    return x, m, y


def fit_model(params, x, m, y, normalize_y=False):
    return MultiFidelityGP(hyperparams=params, normalize_y=normalize_y).fit(
        augment(x, m), y
    )


@pytest.fixture
def model_small():
    """A fitted 12-point, 2-fidelity model on the unit square."""
    params = make_params(seed=3)
    x, m, y = make_dataset(params, n=12, seed=3)
    return fit_model(params, x, m, y)


_CRITERION_TITLES = {
    1: "truncated-normal entropy vs quadrature (1e-6)",
    2: "bounded cross-fidelity entropy vs rejection MC (3 SE)",
    3: "bounded conditional density normalizes (1e-4)",
    4: "pending-conditioned gain vs brute-force MC / eta quadrature",
    5: "reductions: q=1 trace, single-fidelity scores, vacuous pending",
    6: "random-feature kernel error (D=1000 MAE <= 0.05)",
    7: "GP moments and likelihood vs dense references (1e-6..1e-8)",
    8: "multi-fidelity final regret <= single-fidelity, IR <= SR",
    9: "async q=4 reaches sequential final regret at <= 0.6x time",
    10: "repeated runs produce byte-identical traces",
}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per acceptance criterion, printed after the run."""
    import re

    outcomes = {}
    for bucket, label in (("passed", "PASS"), ("failed", "FAIL"), ("error", "FAIL")):
        for rep in terminalreporter.stats.get(bucket, []):
            match = re.search(r"test_acceptance\.py::test_criterion_(\d+)", rep.nodeid)
            if not match:
                continue
            num = int(match.group(1))
            if label == "FAIL":
                outcomes[num] = "FAIL"
            else:
                outcomes.setdefault(num, "PASS")
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(outcomes):
        title = _CRITERION_TITLES.get(num, "")
        terminalreporter.write_line(f"criterion {num:2d} [{outcomes[num]}] {title}")
