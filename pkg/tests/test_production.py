"""Entropy-production functionals: the two algebraically independent forms,
reduction modes, and annihilation at equilibrium."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lfdlab.equilibria import maxwellian, solve_fd_statistics
from lfdlab.grid import build_grid, normalize_to_standard
from lfdlab.production import (
    entropy_production_cross,
    entropy_production_power,
    entropy_production_projection,
)

from conftest import gaussian_values, make_state


def bimodal_state(grid, eps=0.0):
    vals = (0.5 * gaussian_values(grid, center=(0.8, 0.0, 0.0), T=0.7)
            + 0.5 * gaussian_values(grid, center=(-0.8, 0.0, 0.0), T=0.7))
    return normalize_to_standard(make_state(grid, vals, eps=eps)).state


@pytest.mark.parametrize("gamma", [-1.0, 0.0, 1.0])
@pytest.mark.parametrize("eps", [0.0, 1e-2])
def test_projection_and_cross_forms_agree(grid8, gamma, eps):
    g = bimodal_state(grid8, eps)
    a = entropy_production_projection(g, gamma, reduction="deterministic")
    b = entropy_production_cross(g, gamma, reduction="deterministic")
    assert a.form == "projection"
    assert b.form == "cross_product"
    assert a.pair_count == b.pair_count == grid8.n_nodes * (grid8.n_nodes - 1)
    assert b.value == pytest.approx(a.value, rel=1e-10)


def test_projection_nonnegative(grid8):
    # each pair term is a projected square; only cancellation roundoff can
    # push the total below zero
    g = bimodal_state(grid8)
    assert entropy_production_projection(g, 1.0).value >= -1e-12
    assert entropy_production_projection(g, -1.0).value >= -1e-12


def test_reduction_modes_agree(grid8):
    g = bimodal_state(grid8, eps=1e-2)
    det = entropy_production_projection(g, 1.0, reduction="deterministic").value
    fast = entropy_production_projection(g, 1.0, reduction="fast").value
    assert fast == pytest.approx(det, rel=1e-12)


def test_power_form_matches_projection_at_equal_exponent(grid8):
    g = bimodal_state(grid8)
    a = entropy_production_projection(g, 0.5).value
    b = entropy_production_power(g, 0.5).value
    assert b == pytest.approx(a, rel=1e-14)


def test_equilibrium_annihilation():
    grid = build_grid(10, 5.0)
    m = maxwellian(grid)
    # grad h = -v exactly (log form, order-4 stencils), and the projection
    # kills the remaining Pi(z) z term identically
    assert abs(entropy_production_projection(m, 1.0).value) < 1e-12
    _, m_eps = solve_fd_statistics(grid, 1e-2)
    assert abs(entropy_production_projection(m_eps, 1.0).value) < 1e-12


def test_quotient_form_sees_discretization_error():
    grid = build_grid(10, 3.5)
    m = maxwellian(grid)
    log_val = entropy_production_projection(m, 1.0, h_form="log").value
    quot_val = entropy_production_projection(m, 1.0, h_form="quotient").value
    assert abs(log_val) < 1e-12
    assert quot_val > 1e-6  # genuine truncation error, the convergence probe


def test_invalid_arguments(grid6):
    g = bimodal_state(grid6)
    with pytest.raises(ValueError):
        entropy_production_projection(g, -4.0)
    with pytest.raises(ValueError):
        entropy_production_projection(g, 0.0, reduction="sorted")
    with pytest.raises(ValueError):
        entropy_production_projection(g, 0.0, h_form="spectral")


@settings(max_examples=10, deadline=None)
@given(
    cx=st.floats(0.3, 1.2),
    T=st.floats(0.5, 1.2),
    gamma=st.sampled_from([-1.0, 0.0, 1.0]),
)
def test_form_agreement_property(cx, T, gamma):
    grid = build_grid(6, 4.0)
    vals = (0.6 * gaussian_values(grid, center=(cx, 0.0, 0.0), T=T)
            + 0.4 * gaussian_values(grid, center=(-1.5 * cx, 0.0, 0.0), T=T))
    g = normalize_to_standard(make_state(grid, vals)).state
    a = entropy_production_projection(g, gamma, reduction="deterministic").value
    b = entropy_production_cross(g, gamma, reduction="deterministic").value
    assert a >= -1e-12
    assert b == pytest.approx(a, rel=1e-10, abs=1e-18)
