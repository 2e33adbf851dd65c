"""Hot numeric kernels, each with a numba and a pure-numpy implementation.

The public names (``real_sph_harm``, ``greedy_separated_torus``,
``greedy_separated_sphere``) dispatch on ``_jit.USE_NUMBA``. Both variants are
always importable as ``*_numba`` / ``*_numpy`` so they can be cross-checked and
benchmarked against each other.
"""
import math

import numpy as np
from scipy.spatial import cKDTree

from . import _jit
from ._jit import njit

__all__ = [
    "real_sph_harm",
    "real_sph_harm_numba",
    "real_sph_harm_numpy",
    "greedy_separated_torus",
    "greedy_separated_torus_numba",
    "greedy_separated_torus_numpy",
    "greedy_separated_sphere",
    "greedy_separated_sphere_numba",
    "greedy_separated_sphere_numpy",
    "backend",
]


def backend():
    return "numba" if _jit.USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# Real spherical harmonics, orthonormal w.r.t. the normalized surface measure.
# Column of (l, m) is l*l + l + m; m < 0 carries sin(|m| phi), m > 0 cos(m phi).
# ---------------------------------------------------------------------------


def _legendre_coeffs(L):
    a = np.zeros((L + 1, L + 1))
    b = np.zeros((L + 1, L + 1))
    for m in range(L + 1):
        for l in range(m + 2, L + 1):
            den = l * l - m * m
            a[l, m] = math.sqrt((4.0 * l * l - 1.0) / den)
            b[l, m] = math.sqrt((2.0 * l + 1.0) * ((l - 1.0) ** 2 - m * m) / ((2.0 * l - 3.0) * den))
    return a, b


@njit(cache=True)
def _sph_harm_kernel(pts, L, a, b):
    npts = pts.shape[0]
    out = np.empty((npts, (L + 1) * (L + 1)))
    cm = np.empty(L + 1)
    sm = np.empty(L + 1)
    sqrt2 = math.sqrt(2.0)
    for i in range(npts):
        x = pts[i, 0]
        y = pts[i, 1]
        z = pts[i, 2]
        rho = math.sqrt(x * x + y * y)
        if rho > 0.0:
            c1 = x / rho
            s1 = y / rho
        else:
            c1 = 1.0
            s1 = 0.0
        cm[0] = 1.0
        sm[0] = 0.0
        for m in range(1, L + 1):
            cm[m] = cm[m - 1] * c1 - sm[m - 1] * s1
            sm[m] = sm[m - 1] * c1 + cm[m - 1] * s1
        pmm = 1.0
        for m in range(L + 1):
            if m > 0:
                pmm *= math.sqrt((2.0 * m + 1.0) / (2.0 * m)) * rho
            p2 = 0.0
            p1 = pmm
            for l in range(m, L + 1):
                if l == m:
                    p = pmm
                elif l == m + 1:
                    p = math.sqrt(2.0 * m + 3.0) * z * pmm
                else:
                    p = a[l, m] * z * p1 - b[l, m] * p2
                if l > m:
                    p2 = p1
                    p1 = p
                base = l * l + l
                if m == 0:
                    out[i, base] = p
                else:
                    out[i, base + m] = sqrt2 * p * cm[m]
                    out[i, base - m] = sqrt2 * p * sm[m]
    return out


def real_sph_harm_numba(points, L):
    pts = np.ascontiguousarray(points, dtype=np.float64)
    a, b = _legendre_coeffs(L)
    return _sph_harm_kernel(pts, int(L), a, b)


def real_sph_harm_numpy(points, L):
    pts = np.asarray(points, dtype=np.float64)
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    rho = np.sqrt(x * x + y * y)
    safe = rho > 0.0
    c1 = np.where(safe, x / np.where(safe, rho, 1.0), 1.0)
    s1 = np.where(safe, y / np.where(safe, rho, 1.0), 0.0)
    a, b = _legendre_coeffs(L)
    out = np.empty((pts.shape[0], (L + 1) ** 2))
    sqrt2 = math.sqrt(2.0)
    cm = np.ones_like(x)
    sm = np.zeros_like(x)
    pmm = np.ones_like(x)
    for m in range(L + 1):
        if m > 0:
            cm, sm = cm * c1 - sm * s1, sm * c1 + cm * s1
            pmm = pmm * (math.sqrt((2.0 * m + 1.0) / (2.0 * m)) * rho)
        p2 = None
        p1 = pmm
        for l in range(m, L + 1):
            if l == m:
                p = pmm
            elif l == m + 1:
                p = math.sqrt(2.0 * m + 3.0) * z * pmm
            else:
                p = a[l, m] * z * p1 - b[l, m] * p2
            if l > m:
                p2, p1 = p1, p
            base = l * l + l
            if m == 0:
                out[:, base] = p
            else:
                out[:, base + m] = sqrt2 * p * cm
                out[:, base - m] = sqrt2 * p * sm
    return out


# ---------------------------------------------------------------------------
# Greedy eps-separated selection: walk candidates in the given order and keep
# one iff it is at distance >= eps from everything kept so far.
# ---------------------------------------------------------------------------


@njit(cache=True)
def _greedy_torus_kernel(cands, eps):
    n, d = cands.shape
    eps2 = eps * eps
    g = int(math.floor(1.0 / eps))
    keep = np.zeros(n, dtype=np.bool_)
    if g < 3:
        acc = np.empty(n, dtype=np.int64)
        nacc = 0
        for i in range(n):
            ok = True
            for t in range(nacc):
                j = acc[t]
                s = 0.0
                for c in range(d):
                    df = cands[i, c] - cands[j, c]
                    df -= math.floor(df + 0.5)
                    s += df * df
                if s < eps2:
                    ok = False
                    break
            if ok:
                keep[i] = True
                acc[nacc] = i
                nacc += 1
        return keep
    ncell = g ** d
    head = -np.ones(ncell, dtype=np.int64)
    nxt = -np.ones(n, dtype=np.int64)
    cell = np.zeros(3, dtype=np.int64)
    nb = np.zeros(3, dtype=np.int64)
    nshift = 3 ** d
    for i in range(n):
        for c in range(d):
            k = int(math.floor(cands[i, c] * g))
            if k >= g:
                k = g - 1
            if k < 0:
                k = 0
            cell[c] = k
        ok = True
        for s_idx in range(nshift):
            rem = s_idx
            flat = 0
            for c in range(d):
                off = rem % 3 - 1
                rem //= 3
                nb[c] = (cell[c] + off) % g
                flat = flat * g + nb[c]
            j = head[flat]
            while j >= 0:
                s = 0.0
                for c in range(d):
                    df = cands[i, c] - cands[j, c]
                    df -= math.floor(df + 0.5)
                    s += df * df
                if s < eps2:
                    ok = False
                    break
                j = nxt[j]
            if not ok:
                break
        if ok:
            keep[i] = True
            flat = 0
            for c in range(d):
                flat = flat * g + cell[c]
            nxt[i] = head[flat]
            head[flat] = i
    return keep


@njit(cache=True)
def _greedy_sphere_kernel(cands, eps):
    n = cands.shape[0]
    cos_eps = math.cos(eps)
    h = 2.0 * math.sin(0.5 * eps)
    g = int(math.floor(2.0 / h))
    if g < 1:
        g = 1
    keep = np.zeros(n, dtype=np.bool_)
    head = -np.ones(g * g * g, dtype=np.int64)
    nxt = -np.ones(n, dtype=np.int64)
    cell = np.zeros(3, dtype=np.int64)
    for i in range(n):
        for c in range(3):
            k = int(math.floor((cands[i, c] + 1.0) * 0.5 * g))
            if k >= g:
                k = g - 1
            if k < 0:
                k = 0
            cell[c] = k
        ok = True
        for o0 in range(-1, 2):
            c0 = cell[0] + o0
            if c0 < 0 or c0 >= g:
                continue
            for o1 in range(-1, 2):
                c1 = cell[1] + o1
                if c1 < 0 or c1 >= g:
                    continue
                for o2 in range(-1, 2):
                    c2 = cell[2] + o2
                    if c2 < 0 or c2 >= g:
                        continue
                    j = head[(c0 * g + c1) * g + c2]
                    while j >= 0:
                        dot = cands[i, 0] * cands[j, 0] + cands[i, 1] * cands[j, 1] + cands[i, 2] * cands[j, 2]
                        if dot > cos_eps:
                            ok = False
                            break
                        j = nxt[j]
                    if not ok:
                        break
                if not ok:
                    break
            if not ok:
                break
        if ok:
            keep[i] = True
            flat = (cell[0] * g + cell[1]) * g + cell[2]
            nxt[i] = head[flat]
            head[flat] = i
    return keep


def greedy_separated_torus_numba(cands, eps):
    return _greedy_torus_kernel(np.ascontiguousarray(cands, dtype=np.float64), float(eps))


def greedy_separated_sphere_numba(cands, eps):
    return _greedy_sphere_kernel(np.ascontiguousarray(cands, dtype=np.float64), float(eps))


def _greedy_blocking(cands, eps, tree, radius, too_close):
    n = cands.shape[0]
    keep = np.zeros(n, dtype=bool)
    blocked = np.zeros(n, dtype=bool)
    for i in range(n):
        if blocked[i]:
            continue
        keep[i] = True
        near = np.asarray(tree.query_ball_point(cands[i], radius), dtype=np.int64)
        near = near[near > i]
        if near.size:
            blocked[near[too_close(cands[near], cands[i])]] = True
    return keep


def greedy_separated_torus_numpy(cands, eps):
    cands = np.asarray(cands, dtype=np.float64)
    eps2 = eps * eps
    boxed = np.mod(cands, 1.0)
    boxed[boxed >= 1.0] = 0.0
    tree = cKDTree(boxed, boxsize=1.0)

    def too_close(others, x):
        df = others - x
        df -= np.floor(df + 0.5)
        return np.sum(df * df, axis=1) < eps2

    return _greedy_blocking(cands, eps, tree, eps * (1.0 + 1e-9), too_close)


def greedy_separated_sphere_numpy(cands, eps):
    cands = np.asarray(cands, dtype=np.float64)
    cos_eps = math.cos(eps)
    tree = cKDTree(cands)

    def too_close(others, x):
        dot = others[:, 0] * x[0] + others[:, 1] * x[1] + others[:, 2] * x[2]
        return dot > cos_eps

    return _greedy_blocking(cands, eps, tree, 2.0 * math.sin(0.5 * eps) * (1.0 + 1e-9), too_close)


def real_sph_harm(points, L):
    """Real spherical harmonics of degree <= L at unit vectors, shape (N, (L+1)^2)."""
    if _jit.USE_NUMBA:
        return real_sph_harm_numba(points, L)
    return real_sph_harm_numpy(points, L)


def greedy_separated_torus(cands, eps):
    """Mask of the greedily kept candidates on the flat torus [0, 1)^d."""
    if _jit.USE_NUMBA:
        return greedy_separated_torus_numba(cands, eps)
    return greedy_separated_torus_numpy(cands, eps)


def greedy_separated_sphere(cands, eps):
    """Mask of the greedily kept candidates on the unit sphere (geodesic eps)."""
    if _jit.USE_NUMBA:
        return greedy_separated_sphere_numba(cands, eps)
    return greedy_separated_sphere_numpy(cands, eps)
