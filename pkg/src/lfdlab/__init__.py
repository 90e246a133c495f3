"""Numerical laboratory for the quantum (Pauli-blocked) Landau collision
dynamics: velocity-grid states, entropy/Fisher functionals, Fermi-Dirac
equilibria, entropy-production functionals and their inequality checks, and
an explicit time integrator with H-theorem diagnostics."""

from .constants import (
    ConstantsBundle,
    circle_infimum,
    circle_infimum_sampled,
    compute_K_L,
    constants_bundle,
    kernel_sup,
    m_n_fields,
)
from .equilibria import (
    EPS_BAR,
    EquilibriumParams,
    SaturationError,
    maxwellian,
    saturated_state,
    saturation_threshold,
    solve_fd_statistics,
)
from .functionals import (
    boltzmann_entropy,
    fd_entropy,
    fisher_relative_FD,
    fisher_relative_K,
    grad_h_field,
    l1_distance,
    moments,
    relative_entropy,
    weighted_moment,
    weighted_sqrt_fisher,
)
from .grid import (
    DegenerateDispersionError,
    QuantumState,
    ScalarField,
    VectorField,
    VelocityGrid,
    build_grid,
    divergence_conservative,
    gradient,
    integrate,
    normalize_to_standard,
)
from .harness import (
    CHECKS,
    CheckReport,
    TestStateFamily,
    check,
    random_family,
    run_suite,
    summarize,
    write_reports_csv,
)
from .production import (
    entropy_production_cross,
    entropy_production_power,
    entropy_production_projection,
)
from .solver import (
    SolverConfig,
    TrajectoryRecord,
    collision_operator,
    dt_auto,
    evolve,
    fit_decay_rate,
    step,
)

__version__ = "0.1.0"
