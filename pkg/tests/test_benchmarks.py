"""Benchmark objectives, initialization designs, and regret metrics."""

import numpy as np
import pytest

from mfmes.benchmarks import (
    _draw_prior_function,
    hartmann6,
    inference_regret,
    latin_hypercube_init,
    list_benchmarks,
    make_objective,
    simple_regret,
    styblinski_tang,
)
from mfmes.errors import InputError
from mfmes.kernels import SlfmHyperparams
from mfmes.trace import FLAG_ERROR, FLAG_INIT, RegretTrace


# -- raw formulas ---------------------------------------------------------------


def test_styblinski_tang_known_values():
    assert styblinski_tang(np.zeros(2), 2) == 0.0
    assert styblinski_tang(np.ones(2), 2) == pytest.approx(-10.0, abs=1e-12)
    assert styblinski_tang(np.ones(2), 1) == pytest.approx(-8.1, abs=1e-12)
    with pytest.raises(InputError):
        styblinski_tang(np.array([6.0, 0.0]), 2)
    with pytest.raises(InputError):
        styblinski_tang(np.zeros(2), 3)


def test_styblinski_tang_fidelities_differ():
    rng = np.random.default_rng(0)
    x = rng.uniform(-5, 5, size=(50, 2))
    assert not np.allclose(styblinski_tang(x, 1), styblinski_tang(x, 2))


def test_hartmann6_fidelity_gaps():
    rng = np.random.default_rng(1)
    x = rng.uniform(0, 1, size=(200, 6))
    f1, f2, f3 = (hartmann6(x, m) for m in (1, 2, 3))
    # coefficient shifts delta = 0.2, 0.1, 0 give f_m - f_3 = delta_m * sum(exp)
    gap2 = f2 - f3
    gap1 = f1 - f3
    assert np.all(gap2 > 0) and np.all(gap2 <= 0.4 + 1e-12)
    assert np.all(gap1 > 0) and np.all(gap1 <= 0.8 + 1e-12)
    np.testing.assert_allclose(gap1, 2.0 * gap2, rtol=1e-12)
    with pytest.raises(InputError):
        hartmann6(np.full(6, 1.5), 3)


# -- registered objectives --------------------------------------------------------


def test_styblinski_tang_objective_optimum():
    obj = make_objective("styblinski-tang")
    # known global optimum of the 2-d function at x ~ (-2.9035, -2.9035)
    assert obj.optimum_value == pytest.approx(78.33233140754284, abs=1e-8)
    np.testing.assert_allclose(obj.optimum_x, [-2.903534, -2.903534], atol=1e-4)
    # sampling oracle: no random point beats the reported optimum
    rng = np.random.default_rng(2)
    pts = rng.uniform(-5, 5, size=(20000, 2))
    vals = obj.evaluate(pts, 2)
    assert np.max(vals) <= obj.optimum_value + 1e-9
    assert obj.evaluate(obj.optimum_x, 2) == pytest.approx(obj.optimum_value, abs=1e-9)
    # maximization scale: negated relative to the raw formula
    x = rng.uniform(-5, 5, size=(5, 2))
    np.testing.assert_allclose(obj.evaluate(x, 1), -styblinski_tang(x, 1), atol=1e-12)


def test_hartmann6_objective_optimum():
    obj = make_objective("hartmann6")
    assert obj.optimum_value == pytest.approx(3.322368011415515, abs=1e-6)
    rng = np.random.default_rng(3)
    pts = rng.uniform(0, 1, size=(20000, 6))
    assert np.max(obj.evaluate(pts, 3)) <= obj.optimum_value + 1e-9
    assert obj.n_fidelities == 3 and obj.d == 6


def test_single_fidelity_variant_matches_top_fidelity():
    multi = make_objective("styblinski-tang")
    single = make_objective("styblinski-tang-single")
    assert single.n_fidelities == 1
    assert single.costs.of(1) == multi.costs.of(2) == 5.0
    assert single.optimum_value == multi.optimum_value
    rng = np.random.default_rng(4)
    x = rng.uniform(-5, 5, size=(10, 2))
    np.testing.assert_array_equal(single.evaluate(x, 1), multi.evaluate(x, 2))


def test_gp_synthetic_deterministic_per_seed():
    fn_a = _draw_prior_function(_gp_params(), seed=7, n_bases=100)
    fn_b = _draw_prior_function(_gp_params(), seed=7, n_bases=100)
    fn_c = _draw_prior_function(_gp_params(), seed=8, n_bases=100)
    x = np.random.default_rng(5).uniform(size=(10, 3))
    np.testing.assert_array_equal(fn_a(x, 2), fn_b(x, 2))
    assert not np.allclose(fn_a(x, 2), fn_c(x, 2))


def _gp_params():
    return SlfmHyperparams(
        lengthscales=np.full((1, 3), 0.1),
        weights=np.array([[0.9, 0.9]]),
        kappas=np.array([[0.1, 0.1]]),
        noise_variance=1e-6,
    )


def test_gp_synthetic_cross_fidelity_covariance():
    # across independent prior draws, cov(f1(x), f2(x)) = w1*w2 = 0.81 and
    # var(fm(x)) = w^2 + kappa = 0.91 at any fixed x
    params = _gp_params()
    x = np.array([[0.41, 0.13, 0.77]])
    n = 2000
    pairs = np.empty((n, 2))
    for s in range(n):
        fn = _draw_prior_function(params, seed=s, n_bases=200)
        pairs[s, 0] = fn(x, 1)[0]
        pairs[s, 1] = fn(x, 2)[0]
    c1 = pairs[:, 0] - pairs[:, 0].mean()
    c2 = pairs[:, 1] - pairs[:, 1].mean()
    cov = float(np.mean(c1 * c2))
    se = float(np.std(c1 * c2, ddof=1) / np.sqrt(n))
    assert abs(cov - 0.81) <= 3.5 * se
    for col, ctr in ((0, c1), (1, c2)):
        v = float(np.mean(ctr**2))
        se_v = float(np.std(ctr**2, ddof=1) / np.sqrt(n))
        assert abs(v - 0.91) <= 3.5 * se_v


def test_gp_synthetic_objective_shape():
    obj = make_objective("gp-synthetic", seed=0)
    assert obj.d == 3 and obj.n_fidelities == 2
    assert obj.fixed_hyperparams is not None
    assert obj.pool is None
    rng = np.random.default_rng(6)
    pts = rng.uniform(size=(5000, 3))
    assert np.max(obj.evaluate(pts, 2)) <= obj.optimum_value + 1e-9


def test_materials_pool_objective():
    obj = make_objective("materials", seed=0)
    assert obj.pool is not None and obj.pool.shape == (62500, 2)
    assert obj.n_fidelities == 3
    assert [obj.costs.of(m) for m in (1, 2, 3)] == [5.0, 10.0, 60.0]
    # the reported optimum is the pool maximum at the top fidelity
    vals = obj.evaluate(obj.pool[::97], 3)
    assert np.max(vals) <= obj.optimum_value + 1e-9


def test_list_benchmarks_metadata():
    table = {row["name"]: row for row in list_benchmarks()}
    assert set(table) == {
        "styblinski-tang", "styblinski-tang-single", "hartmann6",
        "gp-synthetic", "materials",
    }
    assert table["styblinski-tang"]["costs"] == [1.0, 5.0]
    assert table["styblinski-tang"]["d"] == 2
    assert table["materials"]["pooled"] is True
    assert table["gp-synthetic"]["pooled"] is False
    assert table["hartmann6"]["fidelities"] == 3


def test_make_objective_unknown_name():
    with pytest.raises(InputError, match="unknown benchmark"):
        make_objective("nope")


# -- initialization ---------------------------------------------------------------


def test_latin_hypercube_counts_and_strata():
    obj = make_objective("styblinski-tang")
    X, m, y = latin_hypercube_init(obj, seed=11)
    assert X.shape == (18, 2) and m.shape == (18,) and y.shape == (18,)
    assert np.sum(m == 1) == 10 and np.sum(m == 2) == 8
    np.testing.assert_array_equal(y, obj.evaluate_rows(X, m))
    # Latin property per fidelity block and dimension: one point per stratum
    for fid, count in ((1, 10), (2, 8)):
        block = X[m == fid]
        unit = (block + 5.0) / 10.0
        for dim in range(2):
            strata = np.floor(unit[:, dim] * count).astype(int)
            strata = np.clip(strata, 0, count - 1)
            assert sorted(strata) == list(range(count))


def test_latin_hypercube_deterministic():
    obj = make_objective("styblinski-tang")
    X1, m1, y1 = latin_hypercube_init(obj, seed=12)
    X2, m2, y2 = latin_hypercube_init(obj, seed=12)
    np.testing.assert_array_equal(X1, X2)
    np.testing.assert_array_equal(y1, y2)
    X3, _, _ = latin_hypercube_init(obj, seed=13)
    assert not np.array_equal(X1, X3)


def test_latin_hypercube_pool_snapping():
    obj = make_objective("materials", seed=0)
    X, m, y = latin_hypercube_init(obj, seed=14)
    assert X.shape[0] == sum(obj.init_counts)
    # every init point is a pool row, and no pool row is used twice
    keys = {tuple(row) for row in np.round(X, 12)}
    pool_keys = {tuple(row) for row in np.round(obj.pool, 12)}
    assert keys <= pool_keys
    assert len(keys) == X.shape[0]


# -- regret metrics ----------------------------------------------------------------


def _toy_trace(obj, rows):
    trace = RegretTrace(seed=0, d=obj.d)
    for r in rows:
        trace.append(**r)
    return trace


def test_simple_regret_recompute_matches_stored():
    obj = make_objective("styblinski-tang")
    opt = obj.optimum_value
    pts = [np.array([0.0, 0.0]), np.array([1.0, 1.0]), np.array([-2.9, -2.9])]
    y = [obj.evaluate(p, 2) for p in pts]
    rows = [
        # one init block: both rows share the block-best top-fidelity value
        dict(event_index=0, sim_time=0.0, cumulative_cost=0.0, fidelity=2,
             x=pts[0], y=y[0], simple_regret=opt - y[0], inference_regret=0.1,
             acq_value=np.nan, flags=FLAG_INIT),
        dict(event_index=1, sim_time=0.0, cumulative_cost=0.0, fidelity=1,
             x=pts[1], y=obj.evaluate(pts[1], 1), simple_regret=opt - y[0],
             inference_regret=0.1, acq_value=np.nan, flags=FLAG_INIT),
        # low fidelity never moves simple regret
        dict(event_index=2, sim_time=1.0, cumulative_cost=1.0, fidelity=1,
             x=pts[1], y=obj.evaluate(pts[1], 1), simple_regret=opt - y[0],
             inference_regret=0.1, acq_value=0.5, flags=""),
        # a failed top-fidelity row contributes nothing
        dict(event_index=3, sim_time=6.0, cumulative_cost=6.0, fidelity=2,
             x=pts[2], y=np.nan, simple_regret=opt - y[0],
             inference_regret=0.1, acq_value=0.5, flags=FLAG_ERROR),
        # a good top-fidelity row improves it
        dict(event_index=4, sim_time=11.0, cumulative_cost=11.0, fidelity=2,
             x=pts[2], y=y[2], simple_regret=opt - max(y[0], y[2]),
             inference_regret=0.1, acq_value=0.5, flags=""),
    ]
    trace = _toy_trace(obj, rows)
    got = simple_regret(trace, obj)
    np.testing.assert_allclose(got, np.asarray(trace.simple_regret), atol=1e-12)
    assert np.all(np.diff(got) <= 1e-12)


def test_inference_regret_clipped_by_simple_regret():
    obj = make_objective("styblinski-tang")
    opt = obj.optimum_value
    good = obj.optimum_x
    rows = [
        dict(event_index=0, sim_time=0.0, cumulative_cost=0.0, fidelity=2,
             x=np.array([0.0, 0.0]), y=obj.evaluate(np.zeros(2), 2),
             simple_regret=opt, inference_regret=0.0, acq_value=np.nan,
             flags=FLAG_INIT),
        dict(event_index=1, sim_time=5.0, cumulative_cost=5.0, fidelity=2,
             x=good, y=obj.evaluate(good, 2), simple_regret=0.0,
             inference_regret=0.0, acq_value=1.0, flags=""),
    ]
    trace = _toy_trace(obj, rows)
    # a recommendation worse than the incumbent is clipped to simple regret
    recs = np.vstack([np.array([4.0, 4.0]), good])
    ir = inference_regret(trace, recs, obj)
    raw0 = opt - obj.evaluate(np.array([4.0, 4.0]), 2)
    assert ir[0] == pytest.approx(min(raw0, trace.simple_regret[0]), abs=1e-12)
    assert ir[0] == trace.simple_regret[0]  # clipped
    assert ir[1] == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(InputError):
        inference_regret(trace, recs[:1], obj)


def test_objective_domain_validation():
    obj = make_objective("styblinski-tang")
    with pytest.raises(InputError):
        obj.evaluate(np.array([5.5, 0.0]), 2)
    with pytest.raises(InputError):
        obj.evaluate(np.zeros(2), 5)
