import math

import numpy as np
import pytest

from singular_mfc import ModelParams, ParameterError, SimConfig, simulate_dynkin, simulate_reflected, stationary_mean
from singular_mfc.free_boundary import ergodic_value
from singular_mfc.simulate import calibrate_dt_bias, truncation_bound
from singular_mfc.stationary import stationary_pdf_cdf

from conftest import BASELINE

SHORT = SimConfig(dt=2e-3, horizon=40.0, burn_in=5.0, n_paths=16, seed=11)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"dt": 0.0},
        {"dt": -1e-3},
        {"burn_in": 300.0},
        {"horizon": 10.0, "burn_in": 10.0},
        {"n_paths": 0},
        {"n_paths": 2.5},
        {"n_bins": 0},
        {"seed": -1},
        {"seed": 2**64},
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ParameterError):
        SimConfig(**kwargs)


def test_scheme_stability_guard(baseline_eq, baseline):
    with pytest.raises(ParameterError, match="dt \\* delta"):
        simulate_reflected(baseline_eq.boundaries, 0.0, 0.0, baseline, SimConfig(dt=0.6))


def test_deterministic_and_worker_independent(baseline_eq, baseline):
    b, th, la = baseline_eq.boundaries, baseline_eq.theta_star, baseline_eq.lambda_star
    cfg = SimConfig(dt=5e-3, horizon=10.0, burn_in=1.0, n_paths=5, seed=3)
    one = simulate_reflected(b, th, la, baseline, cfg)
    again = simulate_reflected(b, th, la, baseline, cfg)
    split = simulate_reflected(b, th, la, baseline, cfg, workers=2)
    for other in (again, split):
        assert other.report() == one.report()
        assert np.array_equal(other.path_cost_mfc, one.path_cost_mfc)
    different = simulate_reflected(b, th, la, baseline, cfg.replace(seed=4))
    assert different.mean != one.mean


def test_dynkin_worker_independent(baseline_eq, baseline):
    b = baseline_eq.boundaries
    cfg = SimConfig(dt=5e-3, horizon=20.0, burn_in=0.0, n_paths=7, seed=9)
    args = (b.midpoint, b, baseline_eq.theta_star, baseline_eq.lambda_star, baseline, cfg)
    assert simulate_dynkin(*args) == simulate_dynkin(*args, workers=3)


def test_stats_invariants_and_oracles(baseline_eq, baseline):
    b, th, la = baseline_eq.boundaries, baseline_eq.theta_star, baseline_eq.lambda_star
    s = simulate_reflected(b, th, la, baseline, SHORT)
    assert b.a_plus <= s.mean <= b.a_minus
    assert s.rate_plus >= 0 and s.rate_minus >= 0
    assert s.histogram.sum() == pytest.approx(1.0, abs=1e-12)
    assert len(s.histogram) == SHORT.n_bins
    bias = calibrate_dt_bias(b, th, la, baseline, SHORT)
    assert abs(s.mean - stationary_mean(b, baseline)) <= 3 * s.se_mean + bias.mean
    kappa = ergodic_value(b, th, la, baseline)
    assert abs(s.cost_potential - kappa) <= 3 * s.se_cost + bias.cost_potential
    # local-time rate at a reflecting barrier is sigma^2/2 times the invariant density there
    pdf_lo, _ = stationary_pdf_cdf(b.a_plus, b, baseline)
    assert s.rate_plus == pytest.approx(0.5 * baseline.sigma**2 * pdf_lo, rel=0.1)


def test_histogram_matches_stationary_law(baseline_eq, baseline):
    b, th, la = baseline_eq.boundaries, baseline_eq.theta_star, baseline_eq.lambda_star
    cfg = SimConfig()
    s = simulate_reflected(b, th, la, baseline, cfg.replace(horizon=60.0, n_paths=32))
    _, cdf = stationary_pdf_cdf(np.linspace(b.a_plus, b.a_minus, cfg.n_bins + 1), b, baseline)
    n_eff = 32 * 40.0 * baseline.delta / 2.0
    assert np.max(np.abs(s.histogram - np.diff(cdf))) <= 3.0 / math.sqrt(n_eff)


def test_symmetric_rates_balance(symmetric_eq, symmetric):
    b = symmetric_eq.boundaries
    s = simulate_reflected(b, 0.0, 0.0, symmetric, SHORT.replace(n_paths=32))
    joint = math.hypot(s.se_rate_plus, s.se_rate_minus)
    assert abs(s.rate_plus - s.rate_minus) <= 3 * joint


def test_bias_decays_when_dt_halves():
    # sigma = 2 makes the projection bias dominate the paired noise
    from singular_mfc import solve_potential_mfg

    p = ModelParams(**{**BASELINE, "sigma": 2.0})
    eq = solve_potential_mfg(p, scan=False)
    cfg = SimConfig(dt=0.1, horizon=100.0, burn_in=10.0, n_paths=256, seed=0)
    bias = calibrate_dt_bias(eq.boundaries, eq.theta_star, eq.lambda_star, p, cfg)
    assert abs(bias.fine.cost_potential - eq.kappa_star) < abs(bias.coarse.cost_potential - eq.kappa_star)


def test_dynkin_near_boundaries(baseline_eq, baseline):
    b, th, la = baseline_eq.boundaries, baseline_eq.theta_star, baseline_eq.lambda_star
    cfg = SimConfig(horizon=20.0, burn_in=0.0, n_paths=400, seed=5)
    lo, err_lo = simulate_dynkin(b.a_plus + 1e-4, b, th, la, baseline, cfg)
    hi, err_hi = simulate_dynkin(b.a_minus - 1e-4, b, th, la, baseline, cfg)
    assert lo == pytest.approx(-baseline.k_plus, abs=3 * err_lo)
    assert hi == pytest.approx(baseline.k_minus, abs=3 * err_hi)


def test_dynkin_start_must_be_interior(baseline_eq, baseline):
    b = baseline_eq.boundaries
    with pytest.raises(ParameterError):
        simulate_dynkin(b.a_plus, b, 0.0, 0.0, baseline, SHORT)


def test_truncation_bound_decays(baseline_eq, baseline):
    b = baseline_eq.boundaries
    assert truncation_bound(b, 0.0, 0.0, baseline, 10.0) > truncation_bound(b, 0.0, 0.0, baseline, 20.0) > 0
