"""Shared fixtures: the default operating point and its analytic engine."""

import pytest

from ambientd2d import incident_power_distribution, normalize_config, table1_config


@pytest.fixture(scope="session")
def table1_params():
    return normalize_config(table1_config())


@pytest.fixture(scope="session")
def table1_dist(table1_params):
    return incident_power_distribution(table1_params)


@pytest.fixture(scope="session")
def ppp_wide_params(table1_params):
    """Poisson field in a window wide enough to stand in for the whole plane."""
    return table1_params.replace(alpha="poisson", R=3000.0)


@pytest.fixture(scope="session")
def ppp_wide_dist(ppp_wide_params):
    return incident_power_distribution(ppp_wide_params)
