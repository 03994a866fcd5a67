"""
Shared fixtures for the test suite
"""
import os

import pytest

os.environ.setdefault("COUETTE_LOG_LEVEL", "WARNING")

from couette.numerics.cheb import build_grid  # noqa: E402
from couette.numerics.jop import OperatorCache  # noqa: E402


@pytest.fixture(scope="session")
def grid32():
    return build_grid(32)


@pytest.fixture(scope="session")
def grid64():
    return build_grid(64)


@pytest.fixture(scope="session")
def grid128():
    return build_grid(128)


@pytest.fixture(scope="session")
def cache32(grid32):
    return OperatorCache(grid32)


@pytest.fixture
def out_dir(tmp_path):
    target = tmp_path / "run"
    target.mkdir()
    return target
