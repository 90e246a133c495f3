"""Velocity-space substrate: uniform cell-centered grid, quadrature, differentiation
and the normalization transform bringing a distribution to mass 1, momentum 0, energy 3."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.ndimage import map_coordinates


class DegenerateDispersionError(ValueError):
    """Second-moment matrix of the distribution is (numerically) rank-deficient."""


@dataclass(frozen=True)
class VelocityGrid:
    """Uniform cell-centered lattice on the cube [-extent, extent]^3.

    Node coordinates along each axis are v_k = -L + (k + 1/2) h, k = 0..n-1,
    with h = 2L/n.  Midpoint quadrature: every node carries weight h^3.
    """

    n_per_axis: int
    extent: float

    def __post_init__(self):
        if self.n_per_axis < 4:
            raise ValueError(
                f"n_per_axis must be >= 4 (got {self.n_per_axis}); "
                "the differentiation stencil needs at least 4 points"
            )
        if not self.extent > 0:
            raise ValueError(f"extent must be positive (got {self.extent})")

    @property
    def h(self) -> float:
        return 2.0 * self.extent / self.n_per_axis

    @property
    def n_nodes(self) -> int:
        return self.n_per_axis**3

    @property
    def quad_weight(self) -> float:
        return self.h**3

    @cached_property
    def axis(self) -> np.ndarray:
        n, L, h = self.n_per_axis, self.extent, self.h
        return -L + (np.arange(n) + 0.5) * h

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Meshgrid (ij-indexed) of node coordinates, shape (n, n, n) each."""
        vx, vy, vz = np.meshgrid(self.axis, self.axis, self.axis, indexing="ij")
        for a in (vx, vy, vz):
            a.setflags(write=False)
        return vx, vy, vz

    @cached_property
    def radius2(self) -> np.ndarray:
        vx, vy, vz = self.coords
        r2 = vx * vx + vy * vy + vz * vz
        r2.setflags(write=False)
        return r2

    @cached_property
    def bracket2(self) -> np.ndarray:
        """<v>^2 = 1 + |v|^2 at every node."""
        b2 = 1.0 + self.radius2
        b2.setflags(write=False)
        return b2

    @cached_property
    def nodes(self) -> np.ndarray:
        """All node coordinates as an (N, 3) array, lexicographic in (kx, ky, kz)."""
        vx, vy, vz = self.coords
        pts = np.stack([vx.ravel(), vy.ravel(), vz.ravel()], axis=1)
        pts.setflags(write=False)
        return pts

    def sample(self, func) -> "ScalarField":
        """Sample func(vx, vy, vz) (vectorized over arrays) at the nodes."""
        vx, vy, vz = self.coords
        return ScalarField(self, np.asarray(func(vx, vy, vz), dtype=float))


def build_grid(n_per_axis: int, extent: float) -> VelocityGrid:
    return VelocityGrid(int(n_per_axis), float(extent))


@dataclass
class ScalarField:
    grid: VelocityGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        n = self.grid.n_per_axis
        if self.values.shape != (n, n, n):
            raise ValueError(
                f"field shape {self.values.shape} does not match grid ({n},{n},{n})"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")


@dataclass
class VectorField:
    grid: VelocityGrid
    values: np.ndarray  # shape (3, n, n, n)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        n = self.grid.n_per_axis
        if self.values.shape != (3, n, n, n):
            raise ValueError(
                f"vector field shape {self.values.shape} does not match grid"
            )


def integrate(f: ScalarField) -> float:
    """Midpoint-rule integral over velocity space."""
    return float(np.sum(f.values)) * f.grid.quad_weight


def integrate_values(grid: VelocityGrid, values: np.ndarray) -> float:
    return float(np.sum(values)) * grid.quad_weight


def _diff_axis(values: np.ndarray, axis: int, h: float, order: int) -> np.ndarray:
    """Differentiate along one axis: central stencils inside, one-sided
    second-order at the boundary layers."""
    v = np.moveaxis(values, axis, 0)
    out = np.empty_like(v)
    if order == 2:
        out[1:-1] = (v[2:] - v[:-2]) / (2.0 * h)
    elif order == 4:
        out[2:-2] = (8.0 * (v[3:-1] - v[1:-3]) - (v[4:] - v[:-4])) / (12.0 * h)
        if v.shape[0] >= 6:
            # one-sided stencils of matching order at the boundary layers
            out[0] = (-25.0 * v[0] + 48.0 * v[1] - 36.0 * v[2]
                      + 16.0 * v[3] - 3.0 * v[4]) / (12.0 * h)
            out[1] = (-3.0 * v[0] - 10.0 * v[1] + 18.0 * v[2]
                      - 6.0 * v[3] + v[4]) / (12.0 * h)
            out[-2] = (3.0 * v[-1] + 10.0 * v[-2] - 18.0 * v[-3]
                       + 6.0 * v[-4] - v[-5]) / (12.0 * h)
            out[-1] = (25.0 * v[-1] - 48.0 * v[-2] + 36.0 * v[-3]
                       - 16.0 * v[-4] + 3.0 * v[-5]) / (12.0 * h)
            return np.moveaxis(out, 0, axis)
        out[1] = (v[2] - v[0]) / (2.0 * h)
        out[-2] = (v[-1] - v[-3]) / (2.0 * h)
    else:
        raise ValueError(f"unsupported stencil order {order}")
    out[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
    out[-1] = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * h)
    return np.moveaxis(out, 0, axis)


def gradient(f: ScalarField, order: int = 2) -> VectorField:
    """Finite-difference gradient; exact for affine fields away from the boundary."""
    h = f.grid.h
    comps = [_diff_axis(f.values, ax, h, order) for ax in range(3)]
    return VectorField(f.grid, np.stack(comps))


def divergence(g: VectorField, order: int = 2) -> ScalarField:
    h = g.grid.h
    out = sum(_diff_axis(g.values[ax], ax, h, order) for ax in range(3))
    return ScalarField(g.grid, out)


def _div_axis_conservative(values: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Face-flux divergence along one axis: central differences at interior
    nodes, zero flux through the outer faces.  Sums to zero exactly, which is
    what makes the collision dynamics conserve mass at machine precision."""
    v = np.moveaxis(values, axis, 0)
    face = 0.5 * (v[:-1] + v[1:])  # flux through interior faces
    out = np.empty_like(v)
    out[0] = face[0] / h
    out[1:-1] = (face[1:] - face[:-1]) / h
    out[-1] = -face[-1] / h
    return np.moveaxis(out, 0, axis)


def divergence_conservative(g: VectorField) -> ScalarField:
    h = g.grid.h
    out = sum(_div_axis_conservative(g.values[ax], ax, h) for ax in range(3))
    return ScalarField(g.grid, out)


@dataclass
class QuantumState:
    """A distribution on the grid together with its quantum parameter.

    Pauli exclusion requires 0 <= g <= 1/epsilon when epsilon > 0 (g >= 0 for
    epsilon = 0); kappa0 = 1 - epsilon*max(g) measures distance from saturation.
    """

    field: ScalarField
    epsilon: float
    _validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self._validate:
            g = self.field.values
            tol = 1e-12
            if np.min(g) < -tol:
                raise ValueError(f"distribution is negative (min {np.min(g):g})")
            if self.epsilon > 0 and np.max(g) * self.epsilon > 1.0 + tol:
                raise ValueError(
                    "distribution exceeds the exclusion bound 1/epsilon "
                    f"(max eps*g = {np.max(g) * self.epsilon:g})"
                )

    @property
    def grid(self) -> VelocityGrid:
        return self.field.grid

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    @cached_property
    def kappa0(self) -> float:
        if self.epsilon == 0.0:
            return 1.0
        return float(1.0 - self.epsilon * np.max(self.field.values))

    @cached_property
    def mass(self) -> float:
        return integrate(self.field)

    @cached_property
    def momentum(self) -> np.ndarray:
        vx, vy, vz = self.grid.coords
        g = self.field.values
        w = self.grid.quad_weight
        return np.array(
            [np.sum(g * vx), np.sum(g * vy), np.sum(g * vz)], dtype=float
        ) * w

    @cached_property
    def energy(self) -> float:
        return float(np.sum(self.field.values * self.grid.radius2)) * self.grid.quad_weight

    def occupation(self) -> np.ndarray:
        """F = g(1 - eps*g), the quantum occupation factor."""
        g = self.field.values
        return g * (1.0 - self.epsilon * g)

    def with_values(self, values: np.ndarray, epsilon: float | None = None,
                    validate: bool = True) -> "QuantumState":
        eps = self.epsilon if epsilon is None else epsilon
        return QuantumState(ScalarField(self.grid, values), eps, _validate=validate)


@dataclass
class NormalizationResult:
    state: QuantumState
    iterations: int
    residual: float  # max deviation of (mass, momentum, energy/3, cross moments)
    tail_mass: float  # mass in the outermost cell layer, support-loss diagnostic
    warnings: list[str]


def _moment_block(grid: VelocityGrid, values: np.ndarray):
    w = grid.quad_weight
    vx, vy, vz = grid.coords
    rho = np.sum(values) * w
    mom = np.array([np.sum(values * vx), np.sum(values * vy), np.sum(values * vz)]) * w
    sec = np.array(
        [
            [np.sum(values * vx * vx), np.sum(values * vx * vy), np.sum(values * vx * vz)],
            [0.0, np.sum(values * vy * vy), np.sum(values * vy * vz)],
            [0.0, 0.0, np.sum(values * vz * vz)],
        ]
    ) * w
    sec[1, 0], sec[2, 0], sec[2, 1] = sec[0, 1], sec[0, 2], sec[1, 2]
    return rho, mom, sec


def _deviation(rho, mom, sec) -> float:
    dev = max(abs(rho - 1.0), float(np.max(np.abs(mom))))
    dev = max(dev, abs(np.trace(sec) / 3.0 - 1.0))
    off = max(abs(sec[0, 1]), abs(sec[0, 2]), abs(sec[1, 2]))
    return max(dev, off)


def tail_layer_mass(state: QuantumState) -> float:
    g = state.values
    inner = np.zeros_like(g, dtype=bool)
    inner[1:-1, 1:-1, 1:-1] = True
    return float(np.sum(g[~inner])) * state.grid.quad_weight


def normalize_to_standard(
    g: QuantumState,
    tol: float = 1e-9,
    max_iter: int = 12,
    enter_tol: float = 1e-7,
    tail_warn: float = 1e-6,
) -> NormalizationResult:
    """Rescale/translate/rotate so that (mass, momentum, energy) = (1, 0, 3)
    and the second-moment matrix is diagonal.

    Two-phase iteration.  While the moment deviation is large, the affine map
    f~(v) = (E^{3/2}/rho) f(sqrt(E) R v + u) is applied with trilinear
    resampling (values outside the box read as 0; the quantum parameter
    becomes eps*rho/E^{3/2}).  Once the deviation drops below the resampling
    error scale, a least-change multiplicative correction
    f <- f (1 + sum_k c_k phi_k) over the moment basis (1, v, |v|^2, v_i v_j)
    finishes to tol without further interpolation loss.  A state already
    standard within enter_tol is returned unchanged, which makes the
    operation idempotent.
    """
    grid = g.grid
    values = g.values.copy()
    eps = g.epsilon
    warnings: list[str] = []

    vx, vy, vz = grid.coords
    target_idx = np.stack([vx.ravel(), vy.ravel(), vz.ravel()])  # physical coords
    basis = (np.ones_like(values), vx, vy, vz, grid.radius2,
             vx * vy, vx * vz, vy * vz)
    targets = np.array([1.0, 0.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0])
    resample_tol = 0.2

    residual = np.inf
    it = 0
    for it in range(max_iter + 1):
        rho, mom, sec = _moment_block(grid, values)
        if rho <= 0:
            raise ValueError("cannot normalize a state with nonpositive mass")
        residual = _deviation(rho, mom, sec)
        if residual < (enter_tol if it == 0 else tol):
            break
        if it == max_iter:
            warnings.append(f"normalization stopped at residual {residual:.3g}")
            break
        if residual < resample_tol:
            # multiplicative moment projection
            w = grid.quad_weight
            cur = np.array([np.sum(values * p) for p in basis]) * w
            gram = np.empty((8, 8))
            for a in range(8):
                for b in range(a, 8):
                    gram[a, b] = gram[b, a] = np.sum(
                        values * basis[a] * basis[b]) * w
            try:
                c = np.linalg.solve(gram, targets - cur)
            except np.linalg.LinAlgError as exc:
                raise DegenerateDispersionError(
                    "degenerate moment system in normalization") from exc
            corr = np.ones_like(values)
            for a in range(8):
                corr += c[a] * basis[a]
            values = np.maximum(values * corr, 0.0)
            continue
        u = mom / rho
        centered = sec - rho * np.outer(u, u)
        E = np.trace(centered) / (3.0 * rho)
        if E <= 0:
            raise DegenerateDispersionError("nonpositive dispersion")
        evals, evecs = np.linalg.eigh(centered)
        if evals[0] <= 1e-12 * max(evals[-1], 1e-300):
            raise DegenerateDispersionError("degenerate dispersion (rank < 3)")
        # deterministic eigenvector signs: largest-magnitude component positive
        for k in range(3):
            col = evecs[:, k]
            j = int(np.argmax(np.abs(col)))
            if col[j] < 0:
                evecs[:, k] = -col
        if np.linalg.det(evecs) < 0:
            evecs[:, 2] = -evecs[:, 2]
        src = np.sqrt(E) * (evecs @ target_idx) + u[:, None]
        idx = (src + grid.extent) / grid.h - 0.5
        resampled = map_coordinates(values, idx, order=1, mode="constant", cval=0.0)
        values = (E**1.5 / rho) * resampled.reshape(values.shape)
        eps = eps * rho / E**1.5

    state = QuantumState(ScalarField(grid, np.maximum(values, 0.0)), eps)
    tail = tail_layer_mass(state)
    if tail > tail_warn:
        warnings.append(f"boundary-layer mass {tail:.3g} exceeds {tail_warn:g}")
    return NormalizationResult(state, it, residual, tail, warnings)
