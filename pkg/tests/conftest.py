"""Shared fixtures: small grids and reference states used across the suite."""

import numpy as np
import pytest

from lfdlab.grid import QuantumState, ScalarField, build_grid


def gaussian_values(grid, center=(0.0, 0.0, 0.0), T=1.0):
    T = np.broadcast_to(np.asarray(T, dtype=float), (3,))
    vx, vy, vz = grid.coords
    q = ((vx - center[0]) ** 2 / T[0] + (vy - center[1]) ** 2 / T[1]
         + (vz - center[2]) ** 2 / T[2])
    return np.exp(-0.5 * q) / np.sqrt((2.0 * np.pi) ** 3 * np.prod(T))


def make_state(grid, values, eps=0.0):
    return QuantumState(ScalarField(grid, values), eps)


@pytest.fixture(scope="session")
def grid8():
    return build_grid(8, 5.0)


@pytest.fixture(scope="session")
def grid6():
    return build_grid(6, 4.0)


@pytest.fixture(scope="session")
def grid12():
    return build_grid(12, 5.0)
