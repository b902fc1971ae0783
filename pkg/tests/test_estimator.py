"""Estimators, sweeps, CSV output and exact path enumeration."""
import math

import numpy as np
import pytest

from ionqec.estimator import (LogicalErrorEstimate, adaptive_sample, binomial_error, config_hash,
                              enumerate_paths, estimates_csv, log_grid, loglog_slope, monte_carlo,
                              pseudo_threshold, read_csv, refocus_process_sampling, sweep, sweep_csv)
from ionqec.noise import NoiseParams


def test_binomial_error():
    assert binomial_error(0.1, 100) == pytest.approx(0.03)
    assert binomial_error(0.0, 10) == 0.0
    with pytest.raises(ValueError):
        LogicalErrorEstimate.from_counts(0, 0, NoiseParams())


def test_pseudo_threshold_of_quadratic_curve():
    # p_log = 250 p^2 crosses the diagonal at p = 1/250 exactly (a straight line in log-log)
    grid = log_grid(1e-4, 1e-2, 8)
    y = [250 * p * p for p in grid]
    assert pseudo_threshold(grid, y) == pytest.approx(4e-3, rel=1e-9)


def test_pseudo_threshold_absent():
    grid = log_grid(1e-4, 1e-2, 8)
    assert pseudo_threshold(grid, [0.5 * p for p in grid]) is None
    assert pseudo_threshold(grid, [2 * p for p in grid]) is None


def test_pseudo_threshold_ignores_order_and_zeros():
    x = [1e-2, 1e-3, 1e-4]
    y = [4e-2, 2.5e-4, 0.0]
    # log-distances -ln 4 and +ln 4 put the crossing at the geometric midpoint
    assert pseudo_threshold(x, y) == pytest.approx(math.sqrt(1e-5), rel=1e-9)


def test_loglog_slope():
    x = np.array([1e-5, 1e-4, 1e-3])
    s, se = loglog_slope(x, 3 * x**2)
    assert s == pytest.approx(2.0) and se == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        loglog_slope([1.0], [1.0])


def test_log_grid_density():
    g = log_grid(1e-4, 1e-2, 8)
    assert len(g) == 17 and g[0] == pytest.approx(1e-4) and g[-1] == pytest.approx(1e-2)


def test_noiseless_estimate_is_zero():
    est = monte_carlo(NoiseParams.noiseless(), 1000, 1)
    assert est.p_log == 0.0 and est.err == 0.0 and est.n_samples == 1000


def test_monte_carlo_matches_chunked_adaptive_total():
    noise = NoiseParams(p_ms=1e-2)
    est = adaptive_sample(noise, 3, first_batch=2000, rel_target=0.2, cap=200_000)
    ref = monte_carlo(noise, est.n_samples, 3)
    assert est.failures == ref.failures


def test_adaptive_cap_and_rule_of_three():
    est = adaptive_sample(NoiseParams.noiseless(), 0, first_batch=100, cap=400)
    assert est.capped and est.upper_bound == pytest.approx(3 / 400)
    with pytest.raises(ValueError):
        adaptive_sample(NoiseParams(), cap=10**9)


def test_sweep_and_csv_roundtrip():
    noise = NoiseParams(p_c=1e-6, crosstalk_mode="entangling-incoherent")
    res = sweep("p_ms", [1e-3, 1e-2], noise, 3000, 1, config={"seed": 1})
    text = sweep_csv(res)
    cfg, rows = read_csv(text)
    assert cfg == {"seed": 1}
    assert [float(r["p_ms"]) for r in rows] == [1e-3, 1e-2]
    assert float(rows[1]["p_log"]) == res.estimates[1].p_log
    assert all(r["config_hash"] == config_hash(cfg) for r in rows)
    assert text.rstrip().splitlines()[-1].startswith("# pseudo_threshold=")
    with pytest.raises(ValueError):
        sweep("p_ms", [], noise, 10)


def test_csv_float_precision():
    est = LogicalErrorEstimate.from_counts(1, 3, NoiseParams())
    _, rows = read_csv(estimates_csv([({"k": 0.1}, est)], {}))
    assert float(rows[0]["p_log"]) == 1 / 3


def test_enumerate_paths_rejects_stochastic_noise():
    with pytest.raises(ValueError):
        enumerate_paths(NoiseParams())
    with pytest.raises(ValueError):
        enumerate_paths(NoiseParams.crosstalk_only(1e-3, "entangling-incoherent"))


def test_enumerate_paths_noiseless_and_weights():
    r = enumerate_paths(NoiseParams.noiseless().with_(crosstalk_mode="entangling-coherent"), "zero")
    assert r.p_log == pytest.approx(0.0, abs=1e-15)
    r = enumerate_paths(NoiseParams.crosstalk_only(1e-4, "entangling-coherent"), "zero")
    assert r.total_weight == pytest.approx(1.0, abs=1e-9)
    assert 0 < r.p_log < 0.1


def test_process_sampling_rates_sum_to_one():
    rates = refocus_process_sampling(1e-2, 1e-3, 100_000, np.random.default_rng(0))
    assert sum(rates.values()) == pytest.approx(1.0)
    # only double faults on both echo pulses fall outside the first-order map
    assert rates["other"] < 10 * 1e-2**2
    assert rates["I"] > 0.95
    assert rates["Z_n U_CT"] == pytest.approx(1e-2 / 3, rel=0.1)
