"""Auxiliary constants and fields entering the entropy-production inequalities:
the log-moments K and L, the M/N moment fields, circle infima over S^1,
kernel-type suprema I^(s) and J, and the spectral factor lambda."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels
from .functionals import G_FLOOR, grad_h_field, weighted_moment
from .grid import QuantumState, ScalarField
from .production import DEFAULT_GRAD_ORDER


def _log_occupancy(g: QuantumState) -> np.ndarray:
    """log(1 - eps*g)/eps, the integrand of K; requires kappa0 > 0."""
    if g.kappa0 <= 0:
        raise ValueError("log-moment undefined: state is saturated (kappa0 <= 0)")
    return np.log1p(-g.epsilon * g.values) / g.epsilon


def compute_K_L(g: QuantumState) -> tuple[float, np.ndarray]:
    """K = (1/eps) int log(1 - eps g) dv and its first moments L_j.

    The eps = 0 limit is K = -mass, L = -int g v dv.
    """
    grid = g.grid
    w = grid.quad_weight
    if g.epsilon == 0.0:
        return -g.mass, -g.momentum
    integrand = _log_occupancy(g)
    K = float(np.sum(integrand)) * w
    vx, vy, vz = grid.coords
    L = np.array([
        np.sum(integrand * vx),
        np.sum(integrand * vy),
        np.sum(integrand * vz),
    ]) * w
    return K, L


def moment_form_K(g: QuantumState, axis: int,
                  order: int = DEFAULT_GRAD_ORDER) -> float:
    """K through the moment identity K = int v_i (d_i h) g dv (any axis i).

    Agrees with compute_K_L in the continuum; on the grid this is the form
    under which the double-sum moment identities hold exactly.
    """
    H = grad_h_field(g, order=order).values
    v = g.grid.coords[axis]
    return float(np.sum(v * H[axis] * g.values)) * g.grid.quad_weight


def directional_energies(g: QuantumState) -> np.ndarray:
    vx, vy, vz = g.grid.coords
    f = g.values
    w = g.grid.quad_weight
    return np.array([
        np.sum(f * vx * vx), np.sum(f * vy * vy), np.sum(f * vz * vz),
    ]) * w


def m_n_fields(g: QuantumState, i: int, j: int,
               order: int = DEFAULT_GRAD_ORDER
               ) -> tuple[ScalarField, ScalarField, ScalarField]:
    """The auxiliary fields N_ij, M_ij and the companion closed form for the
    w_j-moment identity.

        N_ij(v) = v_i d_j h - v_j d_i h
        M_ij(v) = -a_i d_j h + K v_j - L_j
        check(v) = a_j d_i h - K v_i + L_i   (equals -M_ji)

    K is evaluated in its per-axis moment form (axis i for M_ij, axis j for
    the check field), which is the discretization under which the double-sum
    identities defining these fields hold on the grid.
    """
    if i == j:
        raise ValueError("m_n_fields requires distinct axes")
    if g.kappa0 <= 0 and g.epsilon > 0:
        raise ValueError("m_n_fields undefined: state is saturated")
    grid = g.grid
    H = grad_h_field(g, order=order).values
    a = directional_energies(g)
    _, L = compute_K_L(g)
    vi, vj = grid.coords[i], grid.coords[j]
    w = grid.quad_weight
    K_i = float(np.sum(vi * H[i] * g.values)) * w
    K_j = float(np.sum(vj * H[j] * g.values)) * w
    N = vi * H[j] - vj * H[i]
    M = -a[i] * H[j] + K_i * vj - L[j]
    check = a[j] * H[i] - K_j * vi + L[i]
    return (ScalarField(grid, N), ScalarField(grid, M),
            ScalarField(grid, check))


def brute_force_q_moment(g: QuantumState, i: int, j: int, weight_axis: int | None,
                         order: int = DEFAULT_GRAD_ORDER) -> np.ndarray:
    """Direct double sum int q_ij(v, w) g(w) m(w) dw at every node v, with
    m(w) = 1 (weight_axis None) or m(w) = w_k.  O(N^2); testing oracle for
    the closed forms of m_n_fields."""
    if i == j:
        raise ValueError("distinct axes required")
    grid = g.grid
    X = np.ascontiguousarray(grid.nodes)
    H = grad_h_field(g, order=order).values.reshape(3, -1).T
    gw = g.values.ravel().copy()
    if weight_axis is not None:
        gw = gw * X[:, weight_axis]
    out = _kernels.q_moment_pass(X, np.ascontiguousarray(H), gw, i, j)
    return (out * grid.quad_weight).reshape(g.values.shape)


def circle_infimum(mx: float, mxy: float, my: float) -> float:
    """Minimum over unit sigma of the quadratic form with moment matrix
    [[mx, -mxy], [-mxy, my]]: the smallest eigenvalue, in closed form."""
    half_sum = 0.5 * (mx + my)
    half_diff = 0.5 * (mx - my)
    return float(half_sum - np.hypot(half_diff, mxy))


def circle_infimum_sampled(mx: float, mxy: float, my: float,
                           n_angles: int = 3600) -> float:
    """Derivative-free oracle for circle_infimum: dense-angle scan followed by
    a bracketed Brent polish around the best sampled angle."""
    from scipy.optimize import minimize_scalar

    def form(t):
        c, s = np.cos(t), np.sin(t)
        return mx * c * c - 2.0 * mxy * c * s + my * s * s

    theta = np.linspace(0.0, 2.0 * np.pi, n_angles, endpoint=False)
    values = form(theta)
    k = int(np.argmin(values))
    dt = 2.0 * np.pi / n_angles
    lo, mid, hi = form(theta[k] - dt), values[k], form(theta[k] + dt)
    if not (mid < lo and mid < hi):
        # flat form (mx == my, mxy == 0): nothing to polish
        return float(mid)
    res = minimize_scalar(form, bracket=(theta[k] - dt, theta[k], theta[k] + dt),
                          method="brent", options={"xtol": 1e-12})
    return float(min(res.fun, mid))


@dataclass
class ConstantsBundle:
    K: float
    L: np.ndarray            # 3-vector
    a: np.ndarray            # directional energies
    A_ell_gamma: np.ndarray  # 3-vector
    B_ij: np.ndarray         # pairs (0,1), (0,2), (1,2)
    e_gamma: float
    A_gamma: float
    B_gamma: float
    I0: float                # I^(0): kernel sup with weight |w|^0
    I2: float                # I^(2): kernel sup with weight |w|^2
    script_I: float          # I0 + I2
    lam: float               # spectral factor lambda(g)
    m_2_plus_gamma: float
    kappa0: float
    gamma: float
    epsilon: float


_PAIRS = ((0, 1), (0, 2), (1, 2))


def _pair_infimum(g: QuantumState, i: int, j: int, weight: np.ndarray) -> float:
    """inf over unit sigma of int |sigma_1 v_i - sigma_2 v_j|^2 g(v) weight dv."""
    vi, vj = g.grid.coords[i], g.grid.coords[j]
    f = g.values * weight
    w = g.grid.quad_weight
    mx = float(np.sum(f * vi * vi)) * w
    my = float(np.sum(f * vj * vj)) * w
    mxy = float(np.sum(f * vi * vj)) * w
    return circle_infimum(mx, mxy, my)


def kernel_sup(g: QuantumState, gamma: float, s: float) -> float:
    """I^(s) = sup_v <v>^gamma int |v-w|^{-gamma} g(w) |w|^s dw.

    The sup is the larger of the grid maximum and the |v| -> infinity limit
    int g |w|^s dw (the kernel weight tends to 1); the w = v node is skipped
    (vanishing or integrable-singularity contribution).
    """
    grid = g.grid
    X = np.ascontiguousarray(grid.nodes)
    r2 = (X * X).sum(axis=1)
    U = (g.values.ravel() * r2 ** (0.5 * s))[:, None].copy()
    W = (1.0 + r2)[:, None] ** (0.5 * gamma)
    sup = _kernels.weighted_sup_pass(X, U, np.ascontiguousarray(W), -gamma)
    grid_sup = float(sup[0]) * grid.quad_weight
    asymptotic = float(np.sum(U)) * grid.quad_weight
    return max(grid_sup, asymptotic)


def constants_bundle(g: QuantumState, gamma: float,
                     order: int = DEFAULT_GRAD_ORDER) -> ConstantsBundle:
    if g.epsilon > 0 and g.kappa0 <= 0:
        raise ValueError("constants undefined: state is saturated (kappa0 <= 0)")
    grid = g.grid
    K, L = compute_K_L(g)
    a = directional_energies(g)
    kappa0 = g.kappa0

    if gamma >= 0:
        A_ell = a / 3.0
    else:
        wts = grid.bracket2 ** (0.5 * gamma)
        f = g.values * wts
        w = grid.quad_weight
        A_ell = np.empty(3)
        for ell in range(3):
            v = grid.coords[ell]
            mx = float(np.sum(f * v * v)) * w
            mxy = float(np.sum(f * v)) * w
            my = float(np.sum(f)) * w
            A_ell[ell] = circle_infimum(mx, mxy, my)
    if np.min(A_ell) <= 0:
        raise ValueError("degenerate direction: min A_ell <= 0")
    if np.min(a) <= 0:
        raise ValueError("degenerate direction: vanishing directional energy")

    bw = grid.bracket2 ** (0.5 * (-2.0 + min(gamma, 0.0)))
    B = np.empty(3)
    for k, (i, j) in enumerate(_PAIRS):
        inv = _pair_infimum(g, i, j, bw)
        if inv <= 0:
            raise ValueError("degenerate direction: B_ij infimum <= 0")
        B[k] = 1.0 / inv

    e_gamma = 3.0 / float(np.min(a))
    A_gamma = max(1.0, 3.0 / float(np.min(A_ell)))
    B_gamma = float(np.max(B))
    I0 = kernel_sup(g, gamma, 0.0)
    I2 = kernel_sup(g, gamma, 2.0)
    script_I = I0 + I2
    m2g = weighted_moment(g, 2.0 + gamma)
    inv_lam = (510.0 * e_gamma**3 / kappa0**2 * max(1.0, B_gamma)
               * max(1.0, m2g) * script_I)
    return ConstantsBundle(
        K=K, L=L, a=a, A_ell_gamma=A_ell, B_ij=B, e_gamma=e_gamma,
        A_gamma=A_gamma, B_gamma=B_gamma, I0=I0, I2=I2, script_I=script_I,
        lam=1.0 / inv_lam, m_2_plus_gamma=m2g, kappa0=kappa0,
        gamma=float(gamma), epsilon=g.epsilon,
    )


def theorem_weights(g: QuantumState, gamma: float
                    ) -> tuple[Callable, Callable, ScalarField, float]:
    """The canonical weight pair for the Gram functional inequality:
    phi(r) = (1+2r)^{gamma/4}, M(v) = (1 - eps g)<v>^{gamma}; returns
    (phi, |phi'|, M, asymptotic value of the J sup)."""
    grid = g.grid

    def phi(r):
        return (1.0 + 2.0 * r) ** (gamma / 4.0)

    def abs_dphi(r):
        return np.abs(gamma / 2.0) * (1.0 + 2.0 * r) ** (gamma / 4.0 - 1.0)

    M = ScalarField(grid, (1.0 - g.epsilon * g.values)
                    * grid.bracket2 ** (0.5 * gamma))
    F = g.occupation()
    r = 0.5 * grid.radius2
    j_asym = float(np.sum(phi(r) ** 2 * F * grid.bracket2)) * grid.quad_weight
    return phi, abs_dphi, M, j_asym


def gram_functionals(g: QuantumState, gamma: float, phi: Callable,
                     abs_dphi: Callable, M: ScalarField, i: int, j: int,
                     D_value: float | None = None,
                     j_asymptotic: float | None = None,
                     order: int = DEFAULT_GRAD_ORDER
                     ) -> tuple[float, float, float, float, float, float]:
    """The six scalars of the Gram functional inequality:
    (Delta, G_2(phi,F), G_2(1,F*M), G_1(phi,g), G_2(|phi'|,g), J_gamma).

    Delta is the determinant of the moment matrix of (1, w_i, w_j) under the
    weight phi(|w|^2/2) F(w); J is the kernel sup against phi^2 F <w>^2,
    taken as the larger of the grid max and an optional analytic tail value.
    """
    if i == j:
        raise ValueError("gram_functionals requires distinct axes")
    grid = g.grid
    w = grid.quad_weight
    F = g.occupation()
    r = 0.5 * grid.radius2
    pw = phi(r) * F
    wi, wj = grid.coords[i], grid.coords[j]
    mom = np.empty((3, 3))
    basis = (np.ones_like(wi), wi, wj)
    for p in range(3):
        for q in range(p, 3):
            mom[p, q] = mom[q, p] = float(np.sum(pw * basis[p] * basis[q])) * w
    delta = float(np.linalg.det(mom))

    b2 = grid.bracket2
    G2phiF = float(np.sum(phi(r) * F * b2)) * w
    G2_1FM = float(np.sum(F * M.values * b2)) * w
    G1phig = float(np.sum(phi(r) * g.values * np.sqrt(b2))) * w
    G2dphig = float(np.sum(abs_dphi(r) * g.values * b2)) * w

    X = np.ascontiguousarray(grid.nodes)
    r2 = (X * X).sum(axis=1)
    U = (phi(0.5 * r2) ** 2 * F.ravel() * (1.0 + r2))[:, None].copy()
    W = M.values.ravel()[:, None].copy()
    sup = _kernels.weighted_sup_pass(X, U, np.ascontiguousarray(W), -gamma)
    J = float(sup[0]) * w
    if j_asymptotic is not None:
        J = max(J, j_asymptotic)
    return delta, G2phiF, G2_1FM, G1phig, G2dphig, J
