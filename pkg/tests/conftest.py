import numpy as np
import pytest

from qtraj import TwoLevelParams, build_two_level_model


@pytest.fixture(scope="session")
def fig1_params():
    return TwoLevelParams(gamma=1.0, p=0.8, nbar=0.0, kd=0.0,
                          omega=1.4360, delta_nu=1.4937, nu=0.0)


@pytest.fixture(scope="session")
def fig1_theta():
    return -0.1748


@pytest.fixture(scope="session")
def fig1_model(fig1_params, fig1_theta):
    return build_two_level_model(fig1_params, "homodyne", theta=fig1_theta)


@pytest.fixture(scope="session")
def fig2_params():
    return TwoLevelParams(gamma=1.0, p=0.8, nbar=0.01, kd=0.7,
                          omega=8.0, delta_nu=1.5, nu=0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
