"""Shared pytest fixtures.

Provides the default lattice, a sine density profile and an isolated
output root so runner and CLI tests never write into the working tree.
"""

import numpy as np
import pytest

from lattice import GridSpec, initial_profile
from utils.config import OUTPUT_ROOT_ENV


@pytest.fixture
def grid():
    return GridSpec(n_sites=256)


@pytest.fixture
def small_grid():
    return GridSpec(n_sites=32)


@pytest.fixture
def sine_profile(grid):
    return initial_profile("sine", grid, amplitude=0.4)


@pytest.fixture
def rho_values():
    return np.linspace(0.05, 1.95, 39)


@pytest.fixture
def output_root(tmp_path, monkeypatch):
    root = tmp_path / "runs"
    monkeypatch.setenv(OUTPUT_ROOT_ENV, str(root))
    return root


@pytest.fixture
def temp_db_path(tmp_path):
    return str(tmp_path / "runs" / "test_runs.db")
