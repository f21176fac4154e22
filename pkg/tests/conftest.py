import pytest

from singular_mfc import ModelParams, solve_potential_mfg

BASELINE = dict(delta=1.0, sigma=1.0, rho=1.5, phi=1.0, psi=0.5, x_bar=1.0, theta_bar=1.0, k_plus=1.0, k_minus=1.0)
SYMMETRIC = dict(BASELINE, x_bar=0.0, theta_bar=0.0)
PHI_BASE = dict(BASELINE, rho=5.0)


@pytest.fixture(scope="session")
def baseline():
    return ModelParams(**BASELINE)


@pytest.fixture(scope="session")
def symmetric():
    return ModelParams(**SYMMETRIC)


@pytest.fixture(scope="session")
def baseline_eq(baseline):
    return solve_potential_mfg(baseline)


@pytest.fixture(scope="session")
def symmetric_eq(symmetric):
    return solve_potential_mfg(symmetric)
