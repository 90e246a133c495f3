"""Fermi-Dirac statistics: parameter solve, residuals, saturation."""

import numpy as np
import pytest
from scipy.integrate import quad

from lfdlab.equilibria import (
    A0,
    B0,
    EPS_BAR,
    SaturationError,
    _fd_profile,
    maxwellian,
    saturated_state,
    saturation_threshold,
    solve_fd_statistics,
)
from lfdlab.grid import build_grid

GRID = build_grid(8, 5.0)  # the params only depend on epsilon, not the grid


def test_classical_limit_parameters():
    params, state = solve_fd_statistics(GRID, 0.0)
    assert params.a_eps == pytest.approx((2.0 * np.pi) ** -1.5, abs=1e-15)
    assert params.b_eps == pytest.approx(0.5, abs=1e-15)
    assert params.residual_mass == 0.0
    assert params.residual_energy == 0.0
    m = maxwellian(GRID)
    assert np.array_equal(state.values, m.values)


@pytest.mark.parametrize("eps", [1e-3, 1e-2, 1e-1, 1.0, 10.0])
def test_residuals_across_the_ladder(eps):
    params, state = solve_fd_statistics(GRID, eps)
    assert abs(params.residual_mass) <= 1e-10
    assert abs(params.residual_energy) <= 1e-10
    assert params.a_eps > 0 and params.b_eps > 0
    assert params.sup_norm == pytest.approx(
        params.a_eps / (1.0 + eps * params.a_eps), rel=1e-14)
    assert float(np.max(state.values)) <= params.sup_norm + 1e-15


def test_small_eps_continuity():
    params, _ = solve_fd_statistics(GRID, 1e-3)
    assert params.a_eps == pytest.approx(A0, abs=1e-3)
    assert params.b_eps == pytest.approx(B0, abs=1e-3)


def test_moments_against_independent_quadrature():
    # adaptive radial quadrature (scipy.integrate.quad) as an independent
    # oracle for the mass/energy constraints
    eps = 1e-1
    params, _ = solve_fd_statistics(GRID, eps)
    a, b = params.a_eps, params.b_eps

    def profile(r):
        return _fd_profile(b * r * r, a, eps)

    mass = 4.0 * np.pi * quad(lambda r: r**2 * profile(r), 0.0, 50.0)[0]
    energy = 4.0 * np.pi * quad(lambda r: r**4 * profile(r), 0.0, 50.0)[0]
    assert mass == pytest.approx(1.0, abs=1e-8)
    assert energy == pytest.approx(3.0, abs=1e-7)


def test_b_eps_stays_above_eighth_below_the_critical_value():
    for eps in (1.0, 5.0, 10.0, 20.0, 30.0, 40.0, 0.999 * EPS_BAR):
        params, _ = solve_fd_statistics(GRID, eps)
        assert params.b_eps > 0.125, f"b_eps = {params.b_eps} at eps = {eps}"


def test_negative_eps_rejected():
    with pytest.raises(ValueError):
        solve_fd_statistics(GRID, -1.0)


def test_saturated_state_geometry():
    eps = 30.0  # ball radius ~1.9 covers several nodes of this coarse grid
    s = saturated_state(GRID, eps)
    vals = np.unique(s.values)
    assert set(vals.tolist()) <= {0.0, 1.0 / eps}
    assert s.kappa0 == 0.0
    # discrete ball mass approaches the continuum value 1 from the staircase
    assert s.mass == pytest.approx(1.0, abs=0.5)
    with pytest.raises(ValueError):
        saturated_state(GRID, -1.0)
    with pytest.raises(ValueError):
        saturated_state(build_grid(8, 0.5), 1e3)  # ball larger than the box


def test_saturation_threshold_matches_degenerate_ball():
    # the fully degenerate ball with mass 1 and energy 3 has radius sqrt(5)
    # and quantum parameter (4 pi / 3) * 5^{3/2}
    expected = 4.0 * np.pi / 3.0 * 5.0**1.5
    bracket = saturation_threshold(GRID, rel_width=1e-4)
    assert bracket.width <= 1e-4
    assert bracket.value < bracket.upper
    assert bracket.value == pytest.approx(expected, rel=5e-3)
    assert bracket.value > EPS_BAR  # the b_eps > 1/8 range sits inside


def test_beyond_saturation_raises():
    with pytest.raises(SaturationError):
        solve_fd_statistics(GRID, 60.0)
