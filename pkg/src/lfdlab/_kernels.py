"""Compiled O(N^2) pair kernels: entropy-production double sums, sup-type
kernel passes, and a direct (non-accelerated) collision flux for verification."""

import numpy as np
from numba import njit


@njit(cache=True, fastmath=True)
def production_pair_sums(X, F, H, gamma, use_cross):
    """Per-outer-node partial sums of the entropy-production double sum.

    X: (N, 3) node coordinates; F: (N,) occupation values; H: (N, 3) grad-h.
    Pairs with either occupation equal to 0 are skipped (they contribute 0).
    use_cross selects the cross-product decomposition |z x y|^2 |z|^gamma
    instead of the projection form |z|^{gamma+2} |Pi(z) y|^2.
    Returns per-node sums over unordered pairs (a < b), unscaled by h^6.
    """
    N = X.shape[0]
    out = np.zeros(N)
    for a in range(N):
        Fa = F[a]
        if Fa == 0.0:
            continue
        xa, ya, za = X[a, 0], X[a, 1], X[a, 2]
        ha0, ha1, ha2 = H[a, 0], H[a, 1], H[a, 2]
        acc = 0.0
        for b in range(a + 1, N):
            Fb = F[b]
            if Fb == 0.0:
                continue
            z0 = xa - X[b, 0]
            z1 = ya - X[b, 1]
            z2 = za - X[b, 2]
            y0 = ha0 - H[b, 0]
            y1 = ha1 - H[b, 1]
            y2 = ha2 - H[b, 2]
            r2 = z0 * z0 + z1 * z1 + z2 * z2
            if use_cross:
                q0 = z1 * y2 - z2 * y1
                q1 = z2 * y0 - z0 * y2
                q2 = z0 * y1 - z1 * y0
                xi = q0 * q0 + q1 * q1 + q2 * q2
                psi = r2 ** (0.5 * gamma)
            else:
                y_sq = y0 * y0 + y1 * y1 + y2 * y2
                zy = z0 * y0 + z1 * y1 + z2 * y2
                xi = y_sq - zy * zy / r2
                psi = r2 ** (0.5 * (gamma + 2.0))
            acc += Fa * Fb * psi * xi
        out[a] = acc
    return out


@njit(cache=True, fastmath=True)
def weighted_sup_pass(X, U, W_out, p):
    """For each column k: sup over nodes a of
        W_out[a, k] * sum_{b != a} |v_a - v_b|^p U[b, k].
    Returns the per-column suprema.  Used for the kernel-type constants whose
    integrand is |v - w|^{-gamma} against various weights.
    """
    N = X.shape[0]
    K = U.shape[1]
    sups = np.full(K, -np.inf)
    for a in range(N):
        xa, ya, za = X[a, 0], X[a, 1], X[a, 2]
        acc = np.zeros(K)
        for b in range(N):
            if b == a:
                continue
            z0 = xa - X[b, 0]
            z1 = ya - X[b, 1]
            z2 = za - X[b, 2]
            r2 = z0 * z0 + z1 * z1 + z2 * z2
            w = r2 ** (0.5 * p)
            for k in range(K):
                acc[k] += w * U[b, k]
        for k in range(K):
            val = W_out[a, k] * acc[k]
            if val > sups[k]:
                sups[k] = val
    return sups


@njit(cache=True, fastmath=True)
def q_moment_pass(X, H, gw, i, j):
    """out[a] = sum_{b != a} q_ij(v_a, v_b) gw[b] with
    q_ij(v, w) = (v-w)_i (d_j h(v) - d_j h(w)) - (v-w)_j (d_i h(v) - d_i h(w));
    gw carries the g(w)-times-weight factor.  The b = a term vanishes."""
    N = X.shape[0]
    out = np.zeros(N)
    for a in range(N):
        via, vja = X[a, i], X[a, j]
        hia, hja = H[a, i], H[a, j]
        acc = 0.0
        for b in range(N):
            if b == a:
                continue
            zi = via - X[b, i]
            zj = vja - X[b, j]
            q = zi * (hja - H[b, j]) - zj * (hia - H[b, i])
            acc += q * gw[b]
        out[a] = acc
    return out


@njit(cache=True, fastmath=True)
def collision_flux_direct(X, F, Gf, gamma):
    """Direct pair sum of the collision flux (no convolution acceleration):
        G(a) = sum_b psi(z) Pi(z) [F(b) grad f(a) - F(a) grad f(b)],
    z = v_a - v_b, psi = |z|^{gamma+2}.  The (a, b) and (b, a) contributions
    are equal and opposite, so each unordered pair is visited once.
    Returns G unscaled by the quadrature weight h^3.
    """
    N = X.shape[0]
    G = np.zeros((N, 3))
    for a in range(N):
        xa, ya, za = X[a, 0], X[a, 1], X[a, 2]
        Fa = F[a]
        ga0, ga1, ga2 = Gf[a, 0], Gf[a, 1], Gf[a, 2]
        for b in range(a + 1, N):
            z0 = xa - X[b, 0]
            z1 = ya - X[b, 1]
            z2 = za - X[b, 2]
            r2 = z0 * z0 + z1 * z1 + z2 * z2
            psi = r2 ** (0.5 * (gamma + 2.0))
            Fb = F[b]
            w0 = Fb * ga0 - Fa * Gf[b, 0]
            w1 = Fb * ga1 - Fa * Gf[b, 1]
            w2 = Fb * ga2 - Fa * Gf[b, 2]
            zw = (z0 * w0 + z1 * w1 + z2 * w2) / r2
            p0 = psi * (w0 - z0 * zw)
            p1 = psi * (w1 - z1 * zw)
            p2 = psi * (w2 - z2 * zw)
            G[a, 0] += p0
            G[a, 1] += p1
            G[a, 2] += p2
            G[b, 0] -= p0
            G[b, 1] -= p1
            G[b, 2] -= p2
    return G
