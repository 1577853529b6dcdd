"""Certified counting and tail bounds for dual-lattice sums.

Counting uses the fundamental-cell argument: distinct lattice points carry
disjoint translates of the basis parallelotope, so the number of points in a
box Q is at most vol(Q dilated by the cell bounding box) / covolume, and at
least vol(Q eroded by it) / covolume.  Shell sums over annuli then reduce to
volume differences, and polynomially decaying envelopes give closed-form
integral remainders.
"""

import numpy as np


def lll_reduce(basis, delta=0.75, max_iters=2000):
    """Floating-point LLL reduction of the columns of a basis matrix."""
    b = np.array(basis, dtype=float).T
    n = b.shape[0]

    def gram(vectors):
        u = np.zeros_like(vectors)
        mu = np.zeros((n, n))
        for i in range(n):
            u[i] = vectors[i]
            for j in range(i):
                denom = u[j] @ u[j]
                mu[i, j] = (vectors[i] @ u[j]) / denom
                u[i] = u[i] - mu[i, j] * u[j]
        return u, mu

    u, mu = gram(b)
    k, iters = 1, 0
    while k < n and iters < max_iters:
        iters += 1
        for j in range(k - 1, -1, -1):
            q = round(mu[k, j])
            if q:
                b[k] = b[k] - q * b[j]
                u, mu = gram(b)
        if u[k] @ u[k] >= (delta - mu[k, k - 1] ** 2) * (u[k - 1] @ u[k - 1]):
            k += 1
        else:
            b[[k - 1, k]] = b[[k, k - 1]]
            u, mu = gram(b)
            k = max(k - 1, 1)
    return b.T


class DualGeometry:
    """Counting geometry of a dual lattice split into blocks (n, m, z)."""

    def __init__(self, dual):
        self.n, self.m, self.z = dual.n, dual.m, dual.z
        self.covolume = dual.covolume
        reduced = lll_reduce(dual.basis)
        widths = np.abs(reduced).sum(axis=1)
        n, m = self.n, self.m
        self.w_dir = widths[:n]
        self.w_int = widths[n:n + m]
        self.w_z = widths[n + m:]

    def _annulus(self, s, widths):
        s = np.asarray(s, dtype=float)
        out = np.prod(2.0 * (s[..., None] + 1.0) + 2.0 * widths, axis=-1)
        inner = np.prod(np.maximum(2.0 * s[..., None] - 2.0 * widths, 0.0),
                        axis=-1)
        return np.maximum(out - inner, 0.0)

    def annulus_dir(self, s):
        return self._annulus(s, self.w_dir)

    def annulus_int(self, s):
        if self.m == 0:
            return np.ones_like(np.asarray(s, dtype=float))
        return self._annulus(s, self.w_int)

    def box_dir(self, half_side):
        return float(np.prod(2.0 * half_side + 2.0 * self.w_dir))

    def torus_factor(self):
        if self.z == 0:
            return 1.0
        return float(np.prod(1.0 + 2.0 * self.w_z))

    def annulus_dir_coeff(self):
        """c with annulus_dir(s) <= c (1+s)^(n-1); the ratio is a bounded
        rational function of s, probed densely plus a 1% pad."""
        s = np.concatenate([np.arange(0.0, 64.0), np.geomspace(64.0, 1e7, 257)])
        vals = self.annulus_dir(s)
        return float(np.max(vals / (1.0 + s) ** (self.n - 1))) * 1.01

    def annulus_int_coeff(self):
        if self.m == 0:
            return 1.0
        s = np.concatenate([np.arange(0.0, 64.0), np.geomspace(64.0, 1e7, 257)])
        vals = self.annulus_int(s)
        return float(np.max(vals / (1.0 + s) ** (self.m - 1))) * 1.01


def shell_sum(term, s0, c_env, p_env, dim, vol_coeff, max_terms=4000):
    """sum_{s >= s0} term(s) plus a certified polynomial remainder.

    term(s) must be bounded by c_env (1+s)^(-p_env) * vol_coeff (1+s)^(dim-1).
    When the decay is too slow for the integral test (p_env <= dim) the
    remainder is infinite; the partial sum is still reported.
    """
    if p_env <= dim:
        return float(np.sum(term(np.array([float(s0)])))), np.inf
    q = p_env - (dim - 1)

    def remainder_at(s):
        return c_env * vol_coeff * (1.0 + s) ** (1 - q) / (q - 1)

    # vectorized blocks; stop when the certified remainder is negligible
    total = 0.0
    s = float(s0)
    for _ in range(max_terms // 64):
        block = s + np.arange(64.0)
        total += float(np.sum(term(block)))
        s += 64.0
        if remainder_at(s) <= 1e-3 * total + 1e-300:
            break
    return total, remainder_at(s)


def internal_shell_sum(geometry, env_h, c_h, p_h, sigma0=0.0):
    """sum over internal shells sigma >= sigma0 of vol * envelope."""
    if geometry.m == 0:
        return float(env_h(np.zeros(1))[0]), 0.0
    total, rem = shell_sum(
        lambda s: geometry.annulus_int(s) * np.asarray(env_h(s)),
        sigma0, c_h, p_h, geometry.m, geometry.annulus_int_coeff())
    return total, rem


def direct_shell_sum(geometry, env_g, c_g, p_g, s0=0.0):
    total, rem = shell_sum(
        lambda s: geometry.annulus_dir(s) * np.asarray(env_g(s)),
        s0, c_g, p_g, geometry.n, geometry.annulus_dir_coeff())
    return total, rem


def pairing_direct_tail(geometry, density, env_h, c_h, p_h, env_g, c_g, p_g,
                        k_max):
    """Bound on |sum over dual points with |k| > k_max of amp * g-check|."""
    e_int, rem_int = internal_shell_sum(geometry, env_h, c_h, p_h)
    s_dir, rem_dir = direct_shell_sum(geometry, env_g, c_g, p_g,
                                      np.floor(k_max))
    factor = density * geometry.torus_factor() / geometry.covolume
    return factor * (e_int + rem_int) * (s_dir + rem_dir)


def pairing_sigma_tail(geometry, density, env_h, c_h, p_h, env_g, c_g, p_g,
                       s_max):
    """Bound on the contribution of dual points with internal radius > s_max."""
    if geometry.m == 0:
        return 0.0
    e_int, rem_int = internal_shell_sum(geometry, env_h, c_h, p_h,
                                        np.floor(s_max))
    s_dir, rem_dir = direct_shell_sum(geometry, env_g, c_g, p_g, 0.0)
    factor = density * geometry.torus_factor() / geometry.covolume
    return factor * (e_int + rem_int) * (s_dir + rem_dir)


def discarded_sigma_mass(geometry, density, env_h, c_h, p_h, k_max, s_max):
    """Bound on the total |amplitude| of peaks with |k| <= k_max left out by
    the internal cutoff s_max."""
    if geometry.m == 0:
        return 0.0
    e_int, rem_int = internal_shell_sum(geometry, env_h, c_h, p_h,
                                        np.floor(s_max))
    factor = density * geometry.torus_factor() / geometry.covolume
    return factor * geometry.box_dir(k_max) * (e_int + rem_int)
