"""Scalar functionals of a quantum state: moments, entropies, relative entropy,
weighted Fisher informations and the concentration/vacuum diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .grid import QuantumState, ScalarField, VectorField, gradient

G_FLOOR = 1e-30  # below this a node counts as vacuum
_CLOSURE_REACH = 4  # widest per-axis footprint of any differentiation stencil


@dataclass
class MomentSet:
    mass: float
    momentum: np.ndarray  # 3-vector
    energy: float
    directional: np.ndarray  # a_i = int g v_i^2 dv
    cross: np.ndarray  # (xy, xz, yz) second moments


def moments(g: QuantumState) -> MomentSet:
    grid = g.grid
    w = grid.quad_weight
    vx, vy, vz = grid.coords
    f = g.values
    a = np.array([np.sum(f * vx * vx), np.sum(f * vy * vy), np.sum(f * vz * vz)]) * w
    cross = np.array(
        [np.sum(f * vx * vy), np.sum(f * vx * vz), np.sum(f * vy * vz)]
    ) * w
    return MomentSet(
        mass=g.mass,
        momentum=g.momentum,
        energy=float(a.sum()),
        directional=a,
        cross=cross,
    )


def weighted_moment(g: QuantumState, s: float) -> float:
    """m_s(g) = int <v>^s |g| dv."""
    grid = g.grid
    w = grid.bracket2 ** (s / 2.0)
    return float(np.sum(np.abs(g.values) * w)) * grid.quad_weight


def _xlogx(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = x[pos] * np.log(x[pos])
    return out


def boltzmann_entropy(g: QuantumState) -> float:
    """H(g) = int g log g dv with 0 log 0 = 0."""
    return float(np.sum(_xlogx(g.values))) * g.grid.quad_weight


def fd_entropy(g: QuantumState) -> float:
    """Fermi-Dirac entropy S_eps(g).

    Diverges as eps -> 0 for fixed g (a -log(eps)*mass term), so eps = 0 is a
    convention error: use boltzmann_entropy (differences of S_eps do converge
    to differences of -H for equal-mass states; see relative_entropy).
    """
    eps = g.epsilon
    if eps == 0.0:
        raise ValueError("fd_entropy undefined at eps = 0; use boltzmann_entropy")
    x = eps * g.values
    if np.max(x) > 1.0 + 1e-12:
        raise ValueError("fd_entropy: eps*g exceeds 1")
    x = np.clip(x, 0.0, 1.0)
    integrand = _xlogx(x) + _xlogx(1.0 - x)
    return -float(np.sum(integrand)) * g.grid.quad_weight / eps


def relative_entropy(f: QuantumState, g: QuantumState, mass_tol: float = 1e-6) -> float:
    """H_eps(f|g) = S_eps(g) - S_eps(f); for eps = 0 this is H(f) - H(g).

    Meaningful only for equal-mass states on the same grid with the same eps.
    """
    if f.grid is not g.grid and f.grid != g.grid:
        raise ValueError("relative_entropy: states live on different grids")
    if f.epsilon != g.epsilon:
        raise ValueError("relative_entropy: quantum parameters differ")
    denom = max(abs(f.mass), abs(g.mass), 1e-300)
    if abs(f.mass - g.mass) / denom > mass_tol:
        raise ValueError(
            f"relative_entropy: masses differ ({f.mass:.8g} vs {g.mass:.8g})"
        )
    if f.epsilon == 0.0:
        return boltzmann_entropy(f) - boltzmann_entropy(g)
    return fd_entropy(g) - fd_entropy(f)


def grad_h_field(g: QuantumState, order: int = 2,
                 form: str = "log") -> VectorField:
    """The field grad h, zero at vacuum nodes.

    h = log(g) - log(1 - eps g) is the quantity whose gradient drives both the
    collision flux and the entropy production.  Two differentiation paths:

    - "log": differentiate the h values themselves.  Robust on steep tails,
      where g spans many decades across one stencil but h varies smoothly (for
      Gaussian-type decay h is close to a quadratic, so the quotient
      amplification below never appears).
    - "quotient": the identity grad h = grad g / (g(1 - eps g)).  Division by
      a tiny g amplifies the stencil truncation error wherever the decay per
      stencil width is large; kept as the independent second path.

    h diverges at vacuum (g = 0) and saturated (eps g = 1) nodes, so any
    stencil that reaches such a node returns garbage, not a gradient: the
    floored log value leaks an O(log G_FLOOR) jump into every stencil touching
    the vacuum boundary, which then dominates the entropy production of
    evolved states whose clipped tails contain exact zeros.  The gradient is
    therefore zeroed on the whole per-axis stencil reach around those nodes;
    the occupancy factor carried by every consumer vanishes there, so the
    dropped contribution is O(G_FLOOR).
    """
    bad = g.values <= G_FLOOR
    if g.epsilon > 0.0:
        bad |= 1.0 - g.epsilon * g.values <= G_FLOOR
    mask = ~bad
    if form == "log":
        h = np.log(np.maximum(g.values, G_FLOOR))
        if g.epsilon > 0.0:
            h -= np.log(np.maximum(1.0 - g.epsilon * g.values, G_FLOOR))
        out = gradient(ScalarField(g.grid, h), order=order).values
    elif form == "quotient":
        grad_g = gradient(g.field, order=order).values
        F = g.occupation()
        out = np.zeros_like(grad_g)
        denom = np.where(mask, F, 1.0)
        safe = mask & (np.abs(denom) > G_FLOOR)
        for c in range(3):
            out[c][safe] = grad_g[c][safe] / denom[safe]
    else:
        raise ValueError(f"unknown grad-h form {form!r}")
    if bad.any():
        reach = np.ones(2 * _CLOSURE_REACH + 1, dtype=bool)
        for c in range(3):
            shape = [1, 1, 1]
            shape[c] = reach.size
            poisoned = ndimage.binary_dilation(
                bad, structure=reach.reshape(shape))
            out[c][poisoned] = 0.0
    else:
        for c in range(3):
            out[c][bad] = 0.0
    return VectorField(g.grid, out)


def weighted_sqrt_fisher(g: QuantumState, gamma: float) -> float:
    """int |grad sqrt(g)|^2 <v>^gamma dv, square root taken pointwise first."""
    s = ScalarField(g.grid, np.sqrt(np.maximum(g.values, 0.0)))
    gs = gradient(s).values
    w = g.grid.bracket2 ** (gamma / 2.0)
    val = np.sum((gs[0] ** 2 + gs[1] ** 2 + gs[2] ** 2) * w)
    return float(val) * g.grid.quad_weight


def fisher_relative_K(g: QuantumState, gamma: float, K: float,
                      order: int = 2) -> float:
    """F^(gamma)(g) = int |grad h - K v|^2 g <v>^gamma dv."""
    if g.epsilon > 0 and g.kappa0 <= 0:
        raise ValueError("fisher_relative_K: state is saturated (kappa0 <= 0)")
    gh = grad_h_field(g, order=order).values
    vx, vy, vz = g.grid.coords
    dev = (gh[0] - K * vx) ** 2 + (gh[1] - K * vy) ** 2 + (gh[2] - K * vz) ** 2
    # vacuum nodes do not contribute
    dev[g.values <= G_FLOOR] = 0.0
    w = g.grid.bracket2 ** (gamma / 2.0)
    return float(np.sum(dev * g.values * w)) * g.grid.quad_weight


def fisher_relative_FD(g: QuantumState, gamma: float, b_eps: float,
                       order: int = 2) -> float:
    """Relative Fisher information against the FD statistics:
    int |grad h + 2 b_eps v|^2 g <v>^{min(gamma,0)} dv."""
    return fisher_relative_K(g, min(gamma, 0.0), -2.0 * b_eps, order=order)


def lemma21_diagnostics(g: QuantumState, R: float, mask: np.ndarray | None = None
                        ) -> tuple[float, float]:
    """Occupation mass in the ball |v| <= R and over an arbitrary node mask."""
    F = g.occupation()
    w = g.grid.quad_weight
    ball = g.grid.radius2 <= R * R
    in_ball = float(np.sum(F[ball])) * w
    if mask is None:
        in_mask = 0.0
    else:
        in_mask = float(np.sum(F[np.asarray(mask, dtype=bool)])) * w
    return in_ball, in_mask


def l1_distance(f: QuantumState, g: QuantumState) -> float:
    return float(np.sum(np.abs(f.values - g.values))) * f.grid.quad_weight


def l2_weighted_norm(g: QuantumState, s: float) -> float:
    """||g||_{L^2_s} = (int g^2 <v>^{2s} dv)^{1/2}."""
    w = g.grid.bracket2 ** s
    return float(np.sqrt(np.sum(g.values**2 * w) * g.grid.quad_weight))
