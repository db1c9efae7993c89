"""Entropy reductions: closed forms, quadrature oracles, density normalization."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from mfmes.entropy import (
    EntropyInputs,
    QuadratureSpec,
    cross_fidelity_density,
    cross_fidelity_entropy,
    cross_fidelity_entropy_noisy,
    gaussian_entropy,
    gaussian_entropy_noisy,
    integrate_1d,
    truncnorm_entropy,
)
from mfmes.errors import InputError

_FINE = QuadratureSpec(n_nodes=256, halfwidth_sigmas=10.0)


def _random_inputs(rng, noise=0.0):
    var_m = rng.uniform(0.2, 2.0)
    var_M = rng.uniform(0.2, 2.0)
    rho = rng.uniform(-0.95, 0.95)
    cov = rho * np.sqrt(var_m * var_M)
    mu_m = rng.uniform(-1, 1)
    mu_M = rng.uniform(-1, 1)
    f_star = mu_M + rng.uniform(-2, 2) * np.sqrt(var_M)
    return EntropyInputs(
        mu_m=mu_m, var_m=var_m, mu_M=mu_M, var_M=var_M, cov_mM=cov,
        f_star=f_star, noise_variance=noise,
    )


# -- gaussian entropy ---------------------------------------------------------


def test_gaussian_entropy_unit():
    assert gaussian_entropy(1.0) == pytest.approx(1.4189385332046727, abs=1e-10)


def test_gaussian_entropy_e_scaling():
    assert gaussian_entropy(np.e) == pytest.approx(2.4189385332046727, abs=1e-10)


def test_gaussian_entropy_half():
    want = 1.4189385332046727 + np.log(0.5)
    assert gaussian_entropy(0.5) == pytest.approx(want, abs=1e-10)


def test_gaussian_entropy_rejects_nonpositive():
    with pytest.raises(InputError):
        gaussian_entropy(0.0)


# -- truncated normal ---------------------------------------------------------


def test_truncnorm_entropy_at_mean():
    want = 1.4189385332046727 + np.log(0.5)
    assert truncnorm_entropy(0.0, 1.0, 0.0) == pytest.approx(want, abs=1e-10)


def test_truncnorm_entropy_unbinding():
    mu, sigma = 0.3, 0.7
    got = truncnorm_entropy(mu, sigma, mu + 100 * sigma)
    assert got == pytest.approx(gaussian_entropy(sigma), abs=1e-10)


def test_truncnorm_entropy_vs_density_quadrature():
    rng = np.random.default_rng(0)
    for _ in range(50):
        mu = rng.uniform(-2, 2)
        sigma = rng.uniform(0.3, 2.0)
        f_star = mu + rng.uniform(-2, 2) * sigma
        gamma = (f_star - mu) / sigma

        def neg_plogp(f):
            z = (f - mu) / sigma
            p = norm.pdf(z) / (sigma * norm.cdf(gamma))
            out = np.where(p > 0, -p * np.log(np.maximum(p, 1e-300)), 0.0)
            return np.where(f <= f_star, out, 0.0)

        lo = min(mu - 10 * sigma, f_star - 10 * sigma)
        direct = integrate_1d(
            neg_plogp, 0.5 * (lo + f_star), 0.5 * (f_star - lo), _FINE
        )
        assert truncnorm_entropy(mu, sigma, f_star) == pytest.approx(direct, abs=1e-6)


def test_truncnorm_entropy_below_gaussian():
    rng = np.random.default_rng(1)
    for _ in range(200):
        sigma = rng.uniform(0.1, 3.0)
        f_star = rng.uniform(-4, 4)
        assert truncnorm_entropy(0.0, sigma, f_star) <= gaussian_entropy(sigma) + 1e-10


# -- noisy variants -----------------------------------------------------------


def test_noisy_entropy_pure_noise():
    assert gaussian_entropy_noisy(0.0, 0.49) == pytest.approx(
        gaussian_entropy(0.7), abs=1e-12
    )


def test_noisy_entropy_var3_noise1():
    assert gaussian_entropy_noisy(3.0, 1.0) == pytest.approx(
        1.4189385332046727 + np.log(2.0), abs=1e-10
    )


def test_noisy_entropy_continuity():
    assert gaussian_entropy_noisy(1.3, 1e-14) == pytest.approx(
        gaussian_entropy(np.sqrt(1.3)), abs=1e-10
    )


def test_cross_fidelity_noisy_continuity_in_noise():
    rng = np.random.default_rng(2)
    for _ in range(10):
        base = _random_inputs(rng)
        noisy = EntropyInputs(
            mu_m=base.mu_m, var_m=base.var_m, mu_M=base.mu_M, var_M=base.var_M,
            cov_mM=base.cov_mM, f_star=base.f_star, noise_variance=1e-12,
        )
        assert cross_fidelity_entropy_noisy(noisy, _FINE) == pytest.approx(
            cross_fidelity_entropy(base, _FINE), abs=1e-6
        )


def test_cross_fidelity_noisy_independence():
    inp = EntropyInputs(
        mu_m=0.1, var_m=0.8, mu_M=-0.2, var_M=1.1, cov_mM=0.0,
        f_star=0.4, noise_variance=0.3,
    )
    assert cross_fidelity_entropy_noisy(inp, _FINE) == pytest.approx(
        gaussian_entropy_noisy(0.8, 0.3), abs=1e-6
    )


# -- cross-fidelity bounded entropy -------------------------------------------


def test_cross_fidelity_independence_limit():
    inp = EntropyInputs(
        mu_m=0.3, var_m=0.9, mu_M=-0.1, var_M=1.4, cov_mM=0.0, f_star=0.2
    )
    assert cross_fidelity_entropy(inp, _FINE) == pytest.approx(
        gaussian_entropy(np.sqrt(0.9)), abs=1e-6
    )


def test_cross_fidelity_degenerate_matches_truncnorm():
    rng = np.random.default_rng(3)
    for _ in range(20):
        var = rng.uniform(0.2, 2.0)
        mu = rng.uniform(-1, 1)
        f_star = mu + rng.uniform(-2, 2) * np.sqrt(var)
        inp = EntropyInputs(
            mu_m=mu, var_m=var, mu_M=mu, var_M=var, cov_mM=var, f_star=f_star
        )
        assert cross_fidelity_entropy(inp, _FINE) == pytest.approx(
            truncnorm_entropy(mu, np.sqrt(var), f_star), abs=1e-5
        )


def test_cross_fidelity_vs_rejection_mc():
    # correlation 0.8, f* = mu_M + 0.5 sigma_M, 1e6-sample rejection oracle
    rng = np.random.default_rng(4)
    var_m, var_M = 1.3, 0.8
    cov = 0.8 * np.sqrt(var_m * var_M)
    mu_m, mu_M = 0.4, -0.2
    f_star = mu_M + 0.5 * np.sqrt(var_M)
    inp = EntropyInputs(
        mu_m=mu_m, var_m=var_m, mu_M=mu_M, var_M=var_M, cov_mM=cov, f_star=f_star
    )
    L = np.linalg.cholesky(np.array([[var_m, cov], [cov, var_M]]))
    z = rng.standard_normal((2, 1_000_000))
    f = (L @ z) + np.array([[mu_m], [mu_M]])
    keep = f[1] <= f_star
    samples = f[0, keep]
    logp = np.log(np.maximum(cross_fidelity_density(inp, samples), 1e-300))
    est = -logp.mean()
    se = logp.std(ddof=1) / np.sqrt(samples.size)
    assert abs(cross_fidelity_entropy(inp, _FINE) - est) <= 3 * se


def test_cross_fidelity_density_normalizes():
    rng = np.random.default_rng(5)
    for _ in range(20):
        inp = _random_inputs(rng)
        sigma = np.sqrt(inp.var_m)
        total = integrate_1d(
            lambda f: cross_fidelity_density(inp, f), inp.mu_m, 8 * sigma, _FINE
        )
        assert total == pytest.approx(1.0, abs=1e-4)


def test_cross_fidelity_below_marginal_entropy():
    rng = np.random.default_rng(6)
    for _ in range(50):
        inp = _random_inputs(rng)
        assert cross_fidelity_entropy(inp, _FINE) <= gaussian_entropy(
            np.sqrt(inp.var_m)
        ) + 1e-5


def test_cross_fidelity_monotone_in_f_star():
    rng = np.random.default_rng(7)
    for _ in range(10):
        base = _random_inputs(rng)
        grid = base.mu_M + np.linspace(-2, 2, 9) * np.sqrt(base.var_M)
        vals = [
            cross_fidelity_entropy(
                EntropyInputs(
                    mu_m=base.mu_m, var_m=base.var_m, mu_M=base.mu_M,
                    var_M=base.var_M, cov_mM=base.cov_mM, f_star=float(fs),
                ),
                _FINE,
            )
            for fs in grid
        ]
        assert np.all(np.diff(vals) >= -1e-7)


def test_cross_fidelity_shift_invariance():
    rng = np.random.default_rng(8)
    for _ in range(10):
        base = _random_inputs(rng)
        c = rng.uniform(-5, 5)
        shifted = EntropyInputs(
            mu_m=base.mu_m + c, var_m=base.var_m, mu_M=base.mu_M + c,
            var_M=base.var_M, cov_mM=base.cov_mM, f_star=base.f_star + c,
        )
        assert cross_fidelity_entropy(shifted, _FINE) == pytest.approx(
            cross_fidelity_entropy(base, _FINE), abs=1e-10
        )


def test_cross_fidelity_noisy_vs_rejection_mc():
    rng = np.random.default_rng(9)
    var_m, var_M, noise = 0.9, 1.2, 0.25
    cov = 0.7 * np.sqrt(var_m * var_M)
    mu_m, mu_M = -0.3, 0.2
    f_star = mu_M + 0.3 * np.sqrt(var_M)
    inp = EntropyInputs(
        mu_m=mu_m, var_m=var_m, mu_M=mu_M, var_M=var_M, cov_mM=cov,
        f_star=f_star, noise_variance=noise,
    )
    # noisy observation y = f_m + eps: joint (y, f_M) is Gaussian with
    # var_y = var_m + noise and unchanged cross-covariance
    L = np.linalg.cholesky(np.array([[var_m + noise, cov], [cov, var_M]]))
    z = rng.standard_normal((2, 1_000_000))
    f = (L @ z) + np.array([[mu_m], [mu_M]])
    keep = f[1] <= f_star
    samples = f[0, keep]
    # density of y | f_M <= f*: same bounded form with inflated variance
    proxy = EntropyInputs(
        mu_m=mu_m, var_m=var_m + noise, mu_M=mu_M, var_M=var_M, cov_mM=cov,
        f_star=f_star,
    )
    logp = np.log(np.maximum(cross_fidelity_density(proxy, samples), 1e-300))
    est = -logp.mean()
    se = logp.std(ddof=1) / np.sqrt(samples.size)
    assert abs(cross_fidelity_entropy_noisy(inp, _FINE) - est) <= 3 * se


# -- quadrature helper ---------------------------------------------------------


def test_integrate_normal_pdf():
    got = integrate_1d(norm.pdf, 0.0, 8.0, _FINE)
    assert got == pytest.approx(1.0, abs=1e-8)


def test_integrate_odd_function():
    got = integrate_1d(lambda x: x * norm.pdf(x), 0.0, 6.0, _FINE)
    assert got == pytest.approx(0.0, abs=1e-10)


def test_integrate_pdf_times_cdf():
    got = integrate_1d(lambda x: norm.pdf(x) * norm.cdf(x), 0.0, 8.0, _FINE)
    assert got == pytest.approx(0.5, abs=1e-8)


def test_integrate_rejects_nonfinite():
    with pytest.raises(InputError):
        integrate_1d(lambda x: np.where(x > 0, np.inf, 1.0), 0.0, 1.0)


def test_quadrature_spec_validation():
    with pytest.raises(InputError):
        QuadratureSpec(n_nodes=8)
    with pytest.raises(InputError):
        QuadratureSpec(halfwidth_sigmas=2.0)


# -- property tests -------------------------------------------------------------


@settings(max_examples=60, deadline=None)
@given(
    st.floats(min_value=0.05, max_value=5.0),
    st.floats(min_value=0.05, max_value=5.0),
    st.floats(min_value=-0.99, max_value=0.99),
    st.floats(min_value=-3.0, max_value=3.0),
)
def test_property_entropy_bounded_and_finite(var_m, var_M, rho, t):
    inp = EntropyInputs(
        mu_m=0.0, var_m=var_m, mu_M=0.0, var_M=var_M,
        cov_mM=rho * np.sqrt(var_m * var_M), f_star=t * np.sqrt(var_M),
    )
    h = cross_fidelity_entropy(inp)
    assert np.isfinite(h)
    assert h <= gaussian_entropy(np.sqrt(var_m)) + 1e-5
