"""Steady states: the classical Maxwellian, the two-parameter Fermi-Dirac
statistics (mass 1, energy 3), the fully saturated state, and the largest
quantum parameter for which the statistics exist."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import QuantumState, ScalarField, VelocityGrid

EPS_BAR = (2.0 / 5.0) ** 2.5 * (18.0 * np.pi) ** 1.5  # b_eps > 1/8 holds below this
A0 = (2.0 * np.pi) ** -1.5
B0 = 0.5


class SaturationError(RuntimeError):
    """No Fermi-Dirac statistics with moments (1, 0, 3) at this epsilon."""


@dataclass
class EquilibriumParams:
    a_eps: float
    b_eps: float
    epsilon: float
    residual_mass: float
    residual_energy: float
    sup_norm: float


def maxwellian(grid: VelocityGrid) -> QuantumState:
    values = A0 * np.exp(-0.5 * grid.radius2)
    return QuantumState(ScalarField(grid, values), 0.0)


_LEGGAUSS_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _leggauss_cached(n: int) -> tuple[np.ndarray, np.ndarray]:
    if n not in _LEGGAUSS_CACHE:
        _LEGGAUSS_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _LEGGAUSS_CACHE[n]


def _fd_profile(x2, a, eps):
    e = np.exp(-x2)
    return a * e / (1.0 + eps * a * e)


def _radial_quadrature(a: float, eps: float, n_nodes: int = 128):
    """Gauss-Legendre nodes/weights in x = sqrt(b)*r covering the occupied
    region: one panel up to the degeneracy edge, one across the tail."""
    xc = float(np.sqrt(max(np.log(max(eps * a, 1.0)), 0.0)))
    x, w = _leggauss_cached(n_nodes)
    panels = []
    edges = [0.0, xc, xc + 12.0] if xc > 0 else [0.0, 12.0]
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
        panels.append((mid + half * x, half * w))
    xs = np.concatenate([p[0] for p in panels])
    ws = np.concatenate([p[1] for p in panels])
    return xs, ws


def _constraint_residuals(log_a: float, log_b: float, eps: float):
    """Residuals of (mass, energy) = (1, 3) and the Jacobian in (log a, log b)."""
    a, b = np.exp(log_a), np.exp(log_b)
    xs, ws = _radial_quadrature(a, eps)
    x2 = xs * xs
    phi = _fd_profile(x2, a, eps)
    dphi = phi * (1.0 - eps * phi)  # d phi / d log a
    c2 = 4.0 * np.pi * b**-1.5
    c4 = 4.0 * np.pi * b**-2.5
    J2 = float(np.sum(ws * x2 * phi))
    J4 = float(np.sum(ws * x2 * x2 * phi))
    r = np.array([c2 * J2 - 1.0, c4 * J4 - 3.0])
    jac = np.array(
        [
            [c2 * float(np.sum(ws * x2 * dphi)), -1.5 * c2 * J2],
            [c4 * float(np.sum(ws * x2 * x2 * dphi)), -2.5 * c4 * J4],
        ]
    )
    return r, jac


def _solve_params(eps: float, guess: tuple[float, float],
                  tol: float = 1e-12, max_iter: int = 200):
    theta = np.log(np.asarray(guess, dtype=float))
    r, jac = _constraint_residuals(theta[0], theta[1], eps)
    norm = float(np.max(np.abs(r)))
    for _ in range(max_iter):
        if norm <= tol:
            return float(np.exp(theta[0])), float(np.exp(theta[1])), r
        try:
            delta = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError as exc:
            raise SaturationError(f"singular Jacobian at eps={eps:g}") from exc
        step = 1.0
        for _ in range(50):
            cand = theta + step * delta
            if cand[1] < np.log(1e-10) or cand[0] > 700.0:
                step *= 0.5
                continue
            r_new, jac_new = _constraint_residuals(cand[0], cand[1], eps)
            n_new = float(np.max(np.abs(r_new)))
            if n_new < norm or n_new <= tol:
                theta, r, jac, norm = cand, r_new, jac_new, n_new
                break
            step *= 0.5
        else:
            raise SaturationError(
                f"Fermi-Dirac parameter solve stalled at eps={eps:g} "
                f"(residual {norm:.3g})"
            )
    raise SaturationError(f"no convergence at eps={eps:g} (residual {norm:.3g})")


def solve_fd_statistics(grid: VelocityGrid, epsilon: float
                        ) -> tuple[EquilibriumParams, QuantumState]:
    """Fermi-Dirac statistics M_eps = a e^{-b|v|^2} / (1 + eps a e^{-b|v|^2})
    with continuum moments (1, 0, 3); parameters from damped Newton on
    (log a, log b), with continuation in eps as a fallback ladder."""
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    if epsilon == 0.0:
        params = EquilibriumParams(A0, B0, 0.0, 0.0, 0.0, A0)
        return params, maxwellian(grid)

    guess = (A0, B0)
    try:
        a, b, r = _solve_params(epsilon, guess)
    except SaturationError:
        # continuation ladder: walk epsilon up from a solvable value, shrinking
        # the step whenever a rung fails, so any sub-saturation target is reached
        a, b = A0, B0
        e = min(1.0, epsilon)
        a, b, r = _solve_params(e, (a, b))
        factor = 1.25
        for _ in range(120):
            if e >= epsilon:
                break
            e_next = min(epsilon, e * factor)
            try:
                a, b, r = _solve_params(e_next, (a, b), max_iter=60)
            except SaturationError:
                factor = factor**0.5
                if factor - 1.0 < 1e-5:
                    raise SaturationError(
                        f"continuation stalled at eps={e:g} short of {epsilon:g}"
                    ) from None
                continue
            e = e_next
        if e < epsilon:
            raise SaturationError(
                f"continuation exhausted at eps={e:g} short of {epsilon:g}"
            )

    sup = a / (1.0 + epsilon * a)
    params = EquilibriumParams(a, b, epsilon, float(r[0]), float(r[1]), sup)
    values = _fd_profile(b * grid.radius2, a, epsilon)
    state = QuantumState(ScalarField(grid, values), epsilon)
    return params, state


def fd_statistics_values(grid: VelocityGrid, a: float, b: float, eps: float
                         ) -> np.ndarray:
    return _fd_profile(b * grid.radius2, a, eps)


def saturated_state(grid: VelocityGrid, epsilon: float) -> QuantumState:
    """F_eps = eps^{-1} on the ball of radius R = (3 eps / 4 pi)^{1/3}."""
    if epsilon <= 0:
        raise ValueError("saturated state requires epsilon > 0")
    R = (3.0 * epsilon / (4.0 * np.pi)) ** (1.0 / 3.0)
    if R >= grid.extent:
        raise ValueError(
            f"saturated ball radius {R:g} does not fit in the box (L={grid.extent:g})"
        )
    values = np.where(grid.radius2 < R * R, 1.0 / epsilon, 0.0)
    return QuantumState(ScalarField(grid, values), epsilon)


@dataclass
class SaturationBracket:
    value: float  # largest epsilon at which the solve succeeded
    upper: float  # smallest epsilon at which it failed
    width: float  # relative bracket width


def saturation_threshold(grid: VelocityGrid, rel_width: float = 1e-6
                         ) -> SaturationBracket:
    """Largest quantum parameter admitting FD statistics with moments (1, 0, 3),
    located by bisection on solver feasibility."""

    warm = [A0, B0]

    def feasible(eps: float) -> bool:
        # warm-started: the last feasible parameters are the natural guess
        try:
            a, b, _ = _solve_params(eps, (warm[0], warm[1]), max_iter=60)
        except SaturationError:
            return False
        warm[0], warm[1] = a, b
        return True

    lo = 1.0
    if not feasible(lo):
        raise RuntimeError("feasibility lost already at eps = 1")
    hi = 16.0
    while feasible(hi):
        lo, hi = hi, hi * 2.0
        if hi > 1e6:
            raise RuntimeError("no saturation found below eps = 1e6")
    while (hi - lo) / lo > rel_width:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return SaturationBracket(lo, hi, (hi - lo) / lo)
