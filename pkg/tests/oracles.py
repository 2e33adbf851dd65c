"""Independent reference computations used by the tests.

Nothing here calls the package solvers; everything is brute force over
small instances or a direct scipy call.
"""
import itertools
import math

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize
from scipy.special import sph_harm_y


def real_harmonics(points, L):
    """Real orthonormal harmonics (normalized measure) built from scipy's complex ones."""
    th = np.arccos(np.clip(points[:, 2], -1.0, 1.0))
    ph = np.arctan2(points[:, 1], points[:, 0])
    out = np.empty((len(points), (L + 1) ** 2))
    for l in range(L + 1):
        for m in range(-l, l + 1):
            Y = sph_harm_y(l, abs(m), th, ph) * math.sqrt(4.0 * math.pi) * (-1.0) ** abs(m)
            if m == 0:
                col = Y.real
            else:
                col = math.sqrt(2.0) * (Y.imag if m < 0 else Y.real)
            out[:, l * l + l + m] = col
    return out


def torus_lattice_count(d, m):
    """Number of integer vectors k in Z^d with |k| <= m, by enumeration."""
    rng = range(-int(m), int(m) + 1)
    return sum(1 for k in itertools.product(rng, repeat=d) if sum(x * x for x in k) <= m * m + 1e-9)


def weighted_lstsq(Phi, f, tau):
    s = np.sqrt(tau)
    return np.linalg.lstsq(s[:, None] * Phi, s * f, rcond=None)[0]


def l1_vertex_oracle(Phi, f, tau):
    """min_c sum tau |f - Phi c| by enumerating basic solutions (interpolation on dim-subsets)."""
    N, m = Phi.shape
    best = math.inf
    for S in itertools.combinations(range(N), m):
        A = Phi[list(S)]
        if abs(np.linalg.det(A)) < 1e-10:
            continue
        c = np.linalg.solve(A, f[list(S)])
        best = min(best, float(np.dot(tau, np.abs(f - Phi @ c))))
    return best


def minimax_dual_oracle(Phi, f):
    """min_c max |f - Phi c| as the largest circuit value |alpha^T f| / |alpha|_1.

    alpha ranges over one-dimensional null spaces of Phi_T^T for index sets T
    of size 2..dim+1; the dual optimum is attained on such a circuit.
    """
    N, m = Phi.shape
    best = 0.0
    for size in range(1, m + 2):
        for T in itertools.combinations(range(N), size):
            ns = sla.null_space(Phi[list(T)].T)
            if ns.shape[1] != 1:
                continue
            a = ns[:, 0]
            if np.any(np.abs(a) < 1e-12):
                continue
            best = max(best, abs(float(a @ f[list(T)])) / float(np.sum(np.abs(a))))
    return best


def lp_direct_oracle(Phi, f, tau, p):
    """min_c (sum tau |f - Phi c|^p)^(1/p) by restarted derivative-free search."""

    def obj(c):
        return float(np.dot(tau, np.abs(f - Phi @ c) ** p))

    starts = [weighted_lstsq(Phi, f, tau)]
    rng = np.random.default_rng(0)
    starts += [starts[0] + rng.standard_normal(Phi.shape[1]) for _ in range(4)]
    best = math.inf
    for x0 in starts:
        res = minimize(obj, x0, method="Nelder-Mead",
                       options={"xatol": 1e-13, "fatol": 1e-16, "maxiter": 40_000, "maxfev": 40_000})
        res = minimize(obj, res.x, method="Powell", options={"xtol": 1e-13, "ftol": 1e-16, "maxiter": 40_000})
        best = min(best, res.fun)
    return best ** (1.0 / p)
