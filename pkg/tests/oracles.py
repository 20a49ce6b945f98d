"""Independent reference computations used to cross-check the package.

Nothing here imports the package's numerical code: each oracle recomputes
its quantity by a different route (explicit formulas, root bracketing,
finite differences, a third-party integrator).
"""

import math

import numpy as np
from scipy.integrate import solve_ivp


def excess_demand_explicit(p, a):
    """Excess demand from the three explicit fraction formulas, entry by entry."""
    p1, p2, p3 = (float(v) for v in p)
    a = np.asarray(a, dtype=float)

    def income(h):
        return p1 * a[0, h] + p2 * a[1, h] + p3 * a[2, h]

    E1 = income(1) / (p3 + p1) + income(2) / (p1 + p2) - (a[0, 0] + a[0, 1] + a[0, 2])
    E2 = income(2) / (p1 + p2) + income(0) / (p2 + p3) - (a[1, 0] + a[1, 1] + a[1, 2])
    E3 = income(0) / (p2 + p3) + income(1) / (p3 + p1) - (a[2, 0] + a[2, 1] + a[2, 2])
    return np.array([E1, E2, E3])


def matrix_explicit(d1, d2, d3, K, L):
    """Endowment matrix written out entry by entry (columns are consumers)."""
    a = np.empty((3, 3))
    a[0, 0], a[1, 1], a[2, 2] = d1, d2, d3
    a[0, 1], a[0, 2] = d3 + L, d2 + K
    a[1, 0], a[1, 2] = d3 + K, d1 + L
    a[2, 0], a[2, 1] = d2 + L, d1 + K
    return a


def rhs_explicit(p, a, gamma):
    p = np.asarray(p, dtype=float)
    E = excess_demand_explicit(p, a)
    return np.array([(pi**gamma if gamma else 1.0) * Ei for pi, Ei in zip(p, E)])


def fd_jacobian(fn, x, h=1e-3):
    """Richardson-extrapolated central differences (error O(h^4))."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    J = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        d1 = (fn(x + h * e) - fn(x - h * e)) / (2 * h)
        d2 = (fn(x + h / 2 * e) - fn(x - h / 2 * e)) / h
        J[:, j] = (4 * d2 - d1) / 3
    return J


def criteria_from_c_spectrum(d):
    """H recovered from the product of the nonzero eigenvalues of C (numeric eigensolve)."""
    d1, d2, d3 = d
    C = np.array(
        [
            [d1, (d3 - d1 - d2) / 2, (d2 - d1 - d3) / 2],
            [(d3 - d1 - d2) / 2, d2, (d1 - d2 - d3) / 2],
            [(d2 - d1 - d3) / 2, (d1 - d2 - d3) / 2, d3],
        ]
    )
    # Restrict to the plane orthogonal to u = (1,1,1), where the two nonzero eigenvalues live.
    Q = np.linalg.qr(np.array([[1, 1, 1], [1, -1, 0], [1, 0, -1]], dtype=float).T)[0][:, 1:]
    w = np.linalg.eigvalsh(Q.T @ C @ Q)
    return 4.0 / 3.0 * w[0] * w[1]


def _next_excess_on_edge(edge, a, s):
    """``E_j`` on edge ``edge`` at ``p_edge = 0, p_j = 1 - s, p_k = s`` (explicit formulas)."""
    i = edge - 1
    j, k = (i + 1) % 3, (i + 2) % 3
    s = np.asarray(s, dtype=float)
    pj, pk = 1.0 - s, s
    # Consumer i owns nothing of value at p_i = 0 except commodities j, k; budgets: sum - p_h.
    f_i = (pj * a[j, i] + pk * a[k, i]) / (pj + pk)
    f_k = (pj * a[j, k] + pk * a[k, k]) / pj
    return f_i + f_k - a[j].sum()


def edge_root_bisection(edge, a, n_grid=4001, tol=1e-15):
    """Zeros of the next commodity's excess demand on edge ``edge``, by bracketing and bisection.

    The edge is parametrized as ``p_edge = 0, p_j = 1 - s, p_k = s``; every sign
    change on a uniform grid is refined by bisection.
    """
    a = np.asarray(a, dtype=float)
    i = edge - 1
    j, k = (i + 1) % 3, (i + 2) % 3
    s = np.linspace(0, 1, n_grid)[1:-1]
    vals = _next_excess_on_edge(edge, a, s)
    roots = []
    for idx in np.nonzero(vals == 0)[0]:
        p = np.zeros(3)
        p[j], p[k] = 1.0 - s[idx], s[idx]
        roots.append(p)
    for idx in np.nonzero(vals[:-1] * vals[1:] < 0)[0]:
        lo, hi, glo = s[idx], s[idx + 1], vals[idx]
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            gm = float(_next_excess_on_edge(edge, a, mid))
            if gm == 0:
                lo = hi = mid
            elif np.sign(gm) == np.sign(glo):
                lo, glo = mid, gm
            else:
                hi = mid
        p = np.zeros(3)
        p[j], p[k] = 1.0 - 0.5 * (lo + hi), 0.5 * (lo + hi)
        roots.append(p)
    return roots


def edge_min_by_grid(edge, a, n=200001):
    """Minimum of ``E_edge`` over the open edge by dense sampling of ``s = p_k / p_j``."""
    i = edge - 1
    j, k = (i + 1) % 3, (i + 2) % 3
    s = np.logspace(-4, 4, n)
    P = np.zeros((n, 3))
    P[:, j], P[:, k] = 1.0, s
    # E_edge on the edge, written out: f_j + f_k - 1 with p_edge = 0.
    f_j = (P[:, j] * a[j, j] + P[:, k] * a[k, j]) / P[:, k]
    f_k = (P[:, j] * a[j, k] + P[:, k] * a[k, k]) / P[:, j]
    E = f_j + f_k - 1.0
    m = int(np.argmin(E))
    return float(E[m]), float(s[m])


def integrate_scipy(p0, a, gamma, t1, rtol=1e-12, atol=1e-14):
    """Reference trajectory endpoint from scipy's DOP853."""
    sol = solve_ivp(lambda t, p: rhs_explicit(p, a, gamma), (0.0, t1), np.asarray(p0, float),
                    method="DOP853", rtol=rtol, atol=atol)
    return sol.y[:, -1]


def random_strict_params(rng, dmin=1e-3):
    """Flat draw over the strict constraint set, written independently of the package sampler."""
    while True:
        d1, d2, d3, m = rng.dirichlet(np.ones(4))
        if min(d1, d2, d3) < dmin:
            continue
        k = rng.uniform(-1.0, 1.0)
        K = (m + k) / 2
        L = 1.0 - d1 - d2 - d3 - K
        if matrix_explicit(d1, d2, d3, K, L).min() >= 0:
            return d1, d2, d3, K, L
