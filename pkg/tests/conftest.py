"""Fixtures compartidas y opción --runslow para los experimentos a escala completa."""

import os
import sys

import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

from utils.grid import TimeGrid  # noqa: E402


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="ejecuta los experimentos a escala de aceptación")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: experimento Monte Carlo a escala de aceptación")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="necesita --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def small_grid() -> TimeGrid:
    return TimeGrid(1.0, 32)


@pytest.fixture
def unit_grid() -> TimeGrid:
    return TimeGrid(1.0, 64)


@pytest.fixture
def seed() -> int:
    return 20250101
