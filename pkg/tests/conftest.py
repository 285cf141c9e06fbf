"""Pytest configuration and fixtures for Mercer Lab tests."""

import math
import os
import tempfile
from unittest.mock import patch

import pytest

from app.kernels import BrownianBridge, HeatKernel, LegendreDecay, PathologicalProduct
from app.nystrom import discretize, discretize_galerkin
from app.quadrature import Interval, build_rule
from app.spectral import eigendecompose

UNIT = Interval(0.0, 1.0)
HEAT = Interval(0.0, math.pi)
SYMMETRIC = Interval(-1.0, 1.0)


@pytest.fixture
def temp_dir():
    """Create a temporary directory for tests."""
    with tempfile.TemporaryDirectory() as tmp_dir:
        yield tmp_dir


@pytest.fixture
def sample_config():
    """Sample configuration override for testing."""
    return {
        "quadrature": {"rule": "gauss-legendre", "nodes": 64},
        "grid": {"size": 21},
        "spectral": {"ordering": "cyclic"},
        "kernels": {"legendre": {"terms": 20}},
        "logging": {"level": "WARNING"},
    }


@pytest.fixture
def mock_env_vars():
    """Mock environment variables for testing."""
    env_vars = {"MERCERLAB_LOG_LEVEL": "warning", "MERCERLAB_SEED": "7"}
    with patch.dict(os.environ, env_vars):
        yield env_vars


@pytest.fixture
def clean_env():
    """Environment without any MERCERLAB_* variables."""
    keys = ("MERCERLAB_CONFIG", "MERCERLAB_LOG_LEVEL", "MERCERLAB_SEED")
    with patch.dict(os.environ, {}, clear=False):
        for key in keys:
            os.environ.pop(key, None)
        yield


@pytest.fixture(scope="session")
def bridge():
    return BrownianBridge()


@pytest.fixture(scope="session")
def pathological():
    return PathologicalProduct(n_max=6)


@pytest.fixture(scope="session")
def legendre():
    return LegendreDecay(terms=100)


@pytest.fixture(scope="session")
def heat_dirichlet():
    return HeatKernel("dirichlet", t=1.0, modes=100)


@pytest.fixture(scope="session")
def heat_neumann():
    return HeatKernel("neumann", t=1.0, modes=100)


@pytest.fixture(scope="session")
def gauss_unit_200():
    return build_rule("gauss-legendre", 200, UNIT)


@pytest.fixture(scope="session")
def gauss_heat_200():
    return build_rule("gauss-legendre", 200, HEAT)


@pytest.fixture(scope="session")
def bridge_op_200(bridge, gauss_unit_200):
    return discretize(bridge, gauss_unit_200)


@pytest.fixture(scope="session")
def bridge_galerkin_200(bridge, gauss_unit_200):
    return discretize_galerkin(bridge, gauss_unit_200)


@pytest.fixture(scope="session")
def bridge_dec_400(bridge):
    """Galerkin Brownian bridge decomposition on 400 Gauss nodes."""
    op = discretize_galerkin(bridge, build_rule("gauss-legendre", 400, UNIT))
    return eigendecompose(op, ordering="parallel")


@pytest.fixture(scope="session")
def bridge_dec_200(bridge_op_200):
    """Sampled Brownian bridge decomposition on 200 Gauss nodes."""
    return eigendecompose(bridge_op_200, ordering="parallel")


@pytest.fixture(scope="session")
def bridge_dec_64(bridge):
    return eigendecompose(discretize(bridge, build_rule("gauss-legendre", 64, UNIT)))


@pytest.fixture(scope="session")
def heat_dec(heat_dirichlet, gauss_heat_200):
    """Dirichlet heat kernel (t=1, 100 modes) decomposition on 200 Gauss nodes."""
    op = discretize(heat_dirichlet, gauss_heat_200)
    return eigendecompose(op, ordering="parallel")


@pytest.fixture(scope="session")
def heat_half_dec(gauss_heat_200):
    op = discretize(HeatKernel("dirichlet", t=0.5, modes=100), gauss_heat_200)
    return eigendecompose(op, ordering="parallel")


# Pytest markers
def pytest_configure(config):
    """Configure pytest markers."""
    config.addinivalue_line("markers", "slow: marks tests as slow")
    config.addinivalue_line("markers", "integration: marks tests as integration tests")
    config.addinivalue_line("markers", "unit: marks tests as unit tests")
