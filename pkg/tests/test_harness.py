"""Check registry, margin conventions, state families, suite execution and
CSV reporting."""

import csv

import numpy as np
import pytest

from lfdlab import harness
from lfdlab.equilibria import saturated_state
from lfdlab.grid import build_grid
from lfdlab.harness import (
    CHECKS,
    CSV_COLUMNS,
    SOFT_CHECKS,
    _rel_margin,
    check,
    random_family,
    run_suite,
    summarize,
    write_reports_csv,
)

GRID = build_grid(8, 5.0)

EXPECTED_CHECKS = {
    "main_theorem", "landau_cercignani", "fisher_control", "prop_functional",
    "lemma_MN", "lemma_eq11", "lemma_ABij", "prop_FisD", "logsob", "csiszar",
    "K_offset", "interpolation", "Ds_bound", "corollary45", "nl1_bound",
    "nl2_bound",
}

EXPECTED_STATES = {
    "fd_equilibrium", "temperature_mixture", "anisotropic_gaussian",
    "two_bump", "asymmetric_bumps", "tilted_gaussian", "radial_shell",
    "quadrupole_perturbed", "clipped_plateau",
}


def family_state(name, eps=0.0):
    fam = harness.TestStateFamily(GRID)
    return dict(fam.states(eps))[name]


def test_registry_is_frozen():
    assert set(CHECKS) == EXPECTED_CHECKS
    assert set(SOFT_CHECKS) <= EXPECTED_CHECKS


def test_unknown_check_raises():
    with pytest.raises(KeyError):
        check("spectral_gap", family_state("temperature_mixture"), 0.0)


def test_margin_convention():
    assert _rel_margin(1.0, 2.0) == pytest.approx(0.5)
    assert _rel_margin(2.0, 1.0) == pytest.approx(-0.5)
    # both sides at (different) roundoff floors: degenerate, margin 0
    assert _rel_margin(1e-12, 1e-30) == 0.0
    assert _rel_margin(0.0, 0.0) == 0.0
    assert _rel_margin(0.0, 1.0) == pytest.approx(1.0)


def test_skip_semantics():
    g0 = family_state("temperature_mixture", eps=0.0)
    geps = family_state("temperature_mixture", eps=1e-2)

    r = check("landau_cercignani", geps, 1.0)
    assert r.skipped and r.passed and "eps" in r.reason

    r = check("main_theorem", g0, -1.0)
    assert r.skipped and "gamma" in r.reason

    r = check("fisher_control", g0, 1.0)
    assert r.skipped

    r = check("K_offset", family_state("fd_equilibrium", eps=1e-2), 1.0)
    assert r.skipped and "equilibrium" in r.reason


def test_saturated_state_is_skipped_not_failed():
    s = saturated_state(GRID, 30.0)
    r = check("main_theorem", s, 1.0)
    assert r.skipped and "kappa0" in r.reason


def test_check_report_contents():
    g = family_state("two_bump", eps=1e-2)
    r = check("csiszar", g, 0.0, descriptor="two_bump")
    assert not r.skipped
    assert r.passed
    assert r.margin >= 0.0
    assert r.lhs <= r.rhs + 1e-12
    assert r.parameters["epsilon"] == g.epsilon
    assert r.parameters["n"] == GRID.n_per_axis
    assert r.state_descriptor == "two_bump"


def test_family_states_are_admissible():
    fam = harness.TestStateFamily(GRID, n_random=2)
    for eps in (0.0, 1e-2):
        states = fam.states(eps)
        names = {name for name, _ in states}
        assert EXPECTED_STATES <= names
        assert sum(1 for n in names if n.startswith("random_mixture")) == 2
        for name, s in states:
            assert s.mass == pytest.approx(1.0, abs=1e-6), name
            assert np.max(np.abs(s.momentum)) < 1e-6, name
            assert s.energy == pytest.approx(3.0, abs=1e-5), name
            assert np.min(s.values) >= 0.0, name
            if eps > 0:
                assert s.kappa0 > 0.0, name


def test_family_caches_states():
    fam = harness.TestStateFamily(GRID)
    assert fam.states(0.0) is fam.states(0.0)


def test_random_family():
    states = random_family(GRID, 1e-2, 4, seed=3)
    assert len(states) == 4
    vals = [s.values for _, s in states]
    assert not np.array_equal(vals[0], vals[1])
    again = random_family(GRID, 1e-2, 4, seed=3)
    assert np.array_equal(vals[0], again[0][1].values)


def test_run_suite_validates_inputs():
    fam = harness.TestStateFamily(GRID)
    with pytest.raises(ValueError):
        run_suite(fam, [], [0.0], [0.0])
    with pytest.raises(ValueError):
        run_suite(fam, ["csiszar"], [], [0.0])
    with pytest.raises(KeyError):
        run_suite(fam, ["spectral_gap"], [0.0], [0.0])


def test_small_suite_and_reports(tmp_path):
    fam = harness.TestStateFamily(GRID)
    reports = run_suite(fam, ["csiszar", "logsob", "nl2_bound"],
                        [0.0], [0.0, 1e-2])
    assert all(r.passed for r in reports)
    assert len(reports) == 3 * 9 * 2  # checks x states x epsilons

    path = tmp_path / "reports.csv"
    write_reports_csv(reports, path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == len(reports) + 1
    for row in rows[1:]:
        float(row[1]), float(row[2])  # gamma, epsilon parse
        assert row[7] in ("True", "False")

    # determinism: a second write is byte-identical
    path2 = tmp_path / "reports2.csv"
    write_reports_csv(reports, path2)
    assert path.read_bytes() == path2.read_bytes()

    text = summarize(reports)
    assert "overall: pass" in text
    assert "csiszar" in text
