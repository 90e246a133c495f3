"""Grid substrate: quadrature, stencils, conservative divergence, states and
the moment normalization."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lfdlab.grid import (
    DegenerateDispersionError,
    QuantumState,
    ScalarField,
    VectorField,
    build_grid,
    divergence,
    divergence_conservative,
    gradient,
    integrate,
    normalize_to_standard,
    tail_layer_mass,
)

from conftest import gaussian_values, make_state


# --- construction and quadrature -------------------------------------------


def test_grid_geometry():
    g = build_grid(8, 4.0)
    assert g.h == pytest.approx(1.0)
    assert g.n_nodes == 512
    assert g.quad_weight == pytest.approx(1.0)
    # cell-centered: no node on the boundary, symmetric about 0
    assert np.max(np.abs(g.axis)) == pytest.approx(4.0 - 0.5 * g.h)
    assert np.allclose(g.axis + g.axis[::-1], 0.0, atol=1e-15)


def test_grid_validation():
    with pytest.raises(ValueError):
        build_grid(3, 4.0)
    with pytest.raises(ValueError):
        build_grid(8, 0.0)
    with pytest.raises(ValueError):
        build_grid(8, -1.0)


def test_midpoint_integral_of_polynomials():
    grid = build_grid(10, 2.0)
    one = ScalarField(grid, np.ones((10, 10, 10)))
    assert integrate(one) == pytest.approx(4.0**3, rel=1e-14)
    vx = grid.coords[0]
    # odd moments vanish by symmetry of the node set
    assert integrate(ScalarField(grid, vx)) == pytest.approx(0.0, abs=1e-12)
    # midpoint rule is exact for linears per cell; quadratic has the known
    # h^2/24-per-cell correction -> compare with the summed closed form
    val = integrate(ScalarField(grid, vx * vx))
    exact_nodes = float(np.sum(grid.axis**2)) * grid.h * 4.0**2
    assert val == pytest.approx(exact_nodes, rel=1e-14)


def test_field_shape_validation():
    grid = build_grid(6, 2.0)
    with pytest.raises(ValueError):
        ScalarField(grid, np.zeros((5, 6, 6)))
    with pytest.raises(ValueError):
        VectorField(grid, np.zeros((2, 6, 6, 6)))
    with pytest.raises(ValueError):
        ScalarField(grid, np.full((6, 6, 6), np.nan))


# --- differentiation --------------------------------------------------------


def test_gradient_order2_exact_on_affine():
    grid = build_grid(8, 3.0)
    vx, vy, vz = grid.coords
    f = 2.0 * vx - 3.0 * vy + 0.5 * vz + 1.0
    g = gradient(ScalarField(grid, f), order=2).values
    assert np.max(np.abs(g[0] - 2.0)) < 1e-13
    assert np.max(np.abs(g[1] + 3.0)) < 1e-13
    assert np.max(np.abs(g[2] - 0.5)) < 1e-13


def test_gradient_order4_exact_on_quartic():
    # interior stencil and the one-sided closures are all degree-4 exact
    grid = build_grid(8, 3.0)
    vx, vy, vz = grid.coords
    f = vx**4 - 2.0 * vy**3 * vx + vz**2 * vy**2
    g = gradient(ScalarField(grid, f), order=4).values
    ex = (4.0 * vx**3 - 2.0 * vy**3,
          -6.0 * vy**2 * vx + 2.0 * vz**2 * vy,
          2.0 * vz * vy**2)
    scale = max(np.max(np.abs(e)) for e in ex)
    for c in range(3):
        assert np.max(np.abs(g[c] - ex[c])) < 1e-11 * scale


def test_gradient_order4_not_exact_on_quintic():
    grid = build_grid(8, 3.0)
    vx = grid.coords[0]
    g = gradient(ScalarField(grid, vx**5), order=4).values
    assert np.max(np.abs(g[0] - 5.0 * vx**4)) > 1e-6


def test_unsupported_stencil_order():
    grid = build_grid(6, 2.0)
    with pytest.raises(ValueError):
        gradient(ScalarField(grid, np.zeros((6, 6, 6))), order=3)


def test_conservative_divergence_sums_to_zero():
    grid = build_grid(10, 3.0)
    rng = np.random.default_rng(7)
    G = VectorField(grid, rng.normal(size=(3, 10, 10, 10)))
    div = divergence_conservative(G)
    total = float(np.sum(div.values)) * grid.quad_weight
    assert abs(total) < 1e-12 * np.max(np.abs(G.values))


def test_conservative_divergence_matches_central_inside():
    grid = build_grid(12, 3.0)
    vx, vy, vz = grid.coords
    vals = np.stack([np.sin(vx) * np.cos(vy), vy * vz, np.cos(vz)])
    G = VectorField(grid, vals)
    a = divergence_conservative(G).values
    b = divergence(G, order=2).values
    inner = (slice(1, -1),) * 3
    assert np.max(np.abs(a[inner] - b[inner])) < 1e-12


# --- quantum states ---------------------------------------------------------


def test_state_validation_and_kappa():
    grid = build_grid(6, 3.0)
    vals = gaussian_values(grid)
    s = make_state(grid, vals, eps=0.1)
    assert s.kappa0 == pytest.approx(1.0 - 0.1 * np.max(vals))
    with pytest.raises(ValueError):
        make_state(grid, vals - 1.0)
    with pytest.raises(ValueError):
        make_state(grid, vals, eps=-0.5)
    with pytest.raises(ValueError):
        # exceeds the exclusion bound 1/eps
        make_state(grid, vals, eps=2.0 / np.max(vals))


def test_state_moments_match_direct_sums():
    grid = build_grid(8, 4.0)
    vals = gaussian_values(grid, center=(0.4, 0.0, -0.2), T=0.9)
    s = make_state(grid, vals)
    w = grid.quad_weight
    vx, vy, vz = grid.coords
    assert s.mass == pytest.approx(float(np.sum(vals)) * w, rel=1e-14)
    assert s.momentum[0] == pytest.approx(float(np.sum(vals * vx)) * w, rel=1e-12)
    assert s.energy == pytest.approx(
        float(np.sum(vals * (vx**2 + vy**2 + vz**2))) * w, rel=1e-14)
    F = s.occupation()
    assert np.array_equal(F, vals)  # eps = 0: F = g


# --- normalization ----------------------------------------------------------


def _moments_of(state):
    grid = state.grid
    vx, vy, vz = grid.coords
    w = grid.quad_weight
    g = state.values
    return (float(np.sum(g)) * w,
            np.array([np.sum(g * vx), np.sum(g * vy), np.sum(g * vz)]) * w,
            float(np.sum(g * grid.radius2)) * w,
            np.array([np.sum(g * vx * vy), np.sum(g * vx * vz),
                      np.sum(g * vy * vz)]) * w)


def test_normalize_known_affine_case():
    grid = build_grid(16, 5.0)
    # mass 2, bulk velocity (0.5, 0, 0), temperature 1.3
    vals = 2.0 * gaussian_values(grid, center=(0.5, 0.0, 0.0), T=1.3)
    res = normalize_to_standard(make_state(grid, vals))
    assert res.residual < 1e-9
    mass, mom, energy, cross = _moments_of(res.state)
    assert mass == pytest.approx(1.0, abs=1e-9)
    assert np.max(np.abs(mom)) < 1e-9
    assert energy == pytest.approx(3.0, abs=1e-8)
    assert np.max(np.abs(cross)) < 1e-9


def test_normalize_idempotent():
    grid = build_grid(12, 5.0)
    res = normalize_to_standard(make_state(grid, gaussian_values(grid, T=1.2)))
    res2 = normalize_to_standard(res.state)
    assert res2.iterations == 0
    assert np.array_equal(res2.state.values, res.state.values)


def test_normalize_rescales_epsilon():
    grid = build_grid(16, 5.0)
    vals = 3.0 * gaussian_values(grid, T=2.0)
    eps = 1e-2
    res = normalize_to_standard(make_state(grid, vals, eps=eps))
    # the affine map changes the quantum parameter by rho / E^{3/2}
    assert res.state.epsilon != eps
    assert res.state.epsilon > 0
    assert res.residual < 1e-9


def test_normalize_rejects_nonpositive_mass():
    grid = build_grid(8, 3.0)
    with pytest.raises(ValueError):
        normalize_to_standard(make_state(grid, np.zeros((8, 8, 8))))


def test_normalize_rejects_degenerate_dispersion():
    grid = build_grid(8, 3.0)
    vals = np.zeros((8, 8, 8))
    vals[:, 4, 4] = 1.0  # all mass on one line: rank-1 second moment
    state = QuantumState(ScalarField(grid, vals), 0.0)
    with pytest.raises(DegenerateDispersionError):
        normalize_to_standard(state)


def test_tail_layer_mass():
    grid = build_grid(8, 3.0)
    vals = np.zeros((8, 8, 8))
    vals[0, 3, 3] = 2.0   # boundary layer
    vals[4, 4, 4] = 1.0   # interior
    s = make_state(grid, vals)
    assert tail_layer_mass(s) == pytest.approx(2.0 * grid.quad_weight)


@settings(max_examples=15, deadline=None)
@given(
    w2=st.floats(0.2, 0.8),
    cx=st.floats(-0.8, 0.8),
    t1=st.floats(0.5, 1.6),
    t2=st.floats(0.5, 1.6),
)
def test_normalize_random_mixtures(w2, cx, t1, t2):
    grid = build_grid(12, 5.0)
    vals = ((1.0 - w2) * gaussian_values(grid, T=t1)
            + w2 * gaussian_values(grid, center=(cx, 0.0, 0.0), T=t2))
    res = normalize_to_standard(make_state(grid, vals))
    mass, mom, energy, cross = _moments_of(res.state)
    assert res.residual < 1e-6
    assert mass == pytest.approx(1.0, abs=1e-6)
    assert np.max(np.abs(mom)) < 1e-6
    assert energy == pytest.approx(3.0, abs=1e-5)
    assert np.max(np.abs(cross)) < 1e-6
    assert np.min(res.state.values) >= 0.0
