"""Weighted least l_p fitting, the discrete reproducing kernel and filtered approximation."""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linprog

from .coeffs import CoeffFunction, PolyCoeffs
from .errors import ConvergenceError, DomainError, LayerError
from .manifold import build_basis, sphere_max_degree

__all__ = [
    "SolverOptions",
    "discrete_objective",
    "least_lp_fit",
    "discrete_gram",
    "discrete_orthonormal_basis",
    "ReproducingKernel",
    "reproducing_kernel",
    "apply_ls_projector",
    "ls_projection_matrix",
    "filter_value",
    "filtered_approx",
    "filtered_approx_from_samples",
    "filter_kernel",
    "filter_kernel_from_basis",
    "kernel_l1_norm",
]

log = logging.getLogger(__name__)

_SINGULAR_RTOL = 1e-12


@dataclass(frozen=True)
class SolverOptions:
    """Knobs for the iterative l_p solvers.

    ``max_iterations`` is the Newton/IRLS budget per smoothing stage;
    ``lawson_max_iterations`` bounds the p = inf iteration. ``method`` overrides the default solver: ``qr`` (p = 2),
    ``irls`` (1 <= p < inf), ``lawson`` (p = inf).
    """

    max_iterations: int = 200
    objective_rtol: float = 1e-10
    irls_epsilon_schedule: tuple = field(default_factory=lambda: tuple(10.0 ** -np.arange(2, 13)))
    method: str = None
    lawson_max_iterations: int = 20_000
    trace: bool = False

    def __post_init__(self):
        if self.max_iterations <= 0 or self.objective_rtol <= 0 or self.lawson_max_iterations <= 0:
            raise DomainError("solver options must be positive")
        sched = np.asarray(self.irls_epsilon_schedule, dtype=float)
        if sched.size == 0 or np.any(sched <= 0) or np.any(np.diff(sched) >= 0):
            raise DomainError("IRLS epsilon schedule must be positive and strictly decreasing")


def discrete_objective(residual, weights, p):
    """(sum tau |r|^p)^(1/p), or max |r| for p = inf."""
    r = np.abs(np.asarray(residual, dtype=float))
    if math.isinf(p):
        return float(r.max()) if r.size else 0.0
    if p == 2.0:
        return float(math.sqrt(np.dot(weights, r * r)))
    return float(np.dot(weights, r**p) ** (1.0 / p))


def _weighted_ls(Phi, f, w):
    sw = np.sqrt(w)
    c, *_ = np.linalg.lstsq(Phi * sw[:, None], f * sw, rcond=None)
    return c


def _qr_fit(Phi, f, tau):
    sw = np.sqrt(tau)
    Q, R = np.linalg.qr(Phi * sw[:, None])
    diag = np.abs(np.diag(R))
    if diag.size and diag.min() < 1e-10 * diag.max():
        raise LayerError("singular normal system: layer cannot determine P_n")
    return sla.solve_triangular(R, Q.T @ (f * sw))


def _l1_vertex(Phi, f, tau, c):
    """Basic solution interpolating f on the dim smallest residuals of c, if it is provably optimal.

    Optimality for p = 1: some alpha with Phi^T alpha = 0 has alpha_k = tau_k sign(r_k)
    off the interpolation set S and |alpha_k| <= tau_k on S.
    """
    m = Phi.shape[1]
    S = np.argsort(np.abs(f - Phi @ c), kind="stable")[:m]
    A = Phi[S]
    try:
        lu = sla.lu_factor(A, check_finite=False)
    except (ValueError, np.linalg.LinAlgError):
        return None
    if np.min(np.abs(np.diag(lu[0]))) < 1e-10 * np.max(np.abs(lu[0])):
        return None
    cv = sla.lu_solve(lu, f[S])
    off = np.ones(len(f), dtype=bool)
    off[S] = False
    alpha_off = tau[off] * np.sign((f - Phi @ cv)[off])
    alpha_S = sla.lu_solve(lu, -(Phi[off].T @ alpha_off), trans=1)
    if np.all(np.abs(alpha_S) <= tau[S] * (1.0 + 1e-9)):
        return cv
    return None


def _irls(Phi, f, tau, p, opts, trace):
    """Smoothed IRLS with Newton weights and backtracking.

    Each stage minimizes sum tau (r^2 + eps^2)^(p/2) for one eps of the
    schedule, warm-started from the previous stage. Steps are weighted least
    squares solves with the exact curvature of the smoothed objective; a plain
    IRLS step (weights tau (r^2 + eps^2)^(p/2 - 1)) is the fallback when the
    Newton step does not decrease the objective. For p = 1 each stage ends
    with an attempt to certify the nearby vertex solution, which is exact.
    """
    c = _qr_fit(Phi, f, tau)
    scale = float(np.max(np.abs(f))) if f.size else 1.0
    scale = scale if scale > 0 else 1.0
    obj = discrete_objective(f - Phi @ c, tau, p)
    if obj <= 1e-14 * scale:
        return c, obj, 0
    total = 0
    for eps_rel in opts.irls_epsilon_schedule:
        eps2 = (eps_rel * scale) ** 2

        def smoothed(cc):
            rr = f - Phi @ cc
            return float(np.dot(tau, (rr * rr + eps2) ** (0.5 * p))), rr

        F, r = smoothed(c)
        for it in range(opts.max_iterations):
            total += 1
            s2 = r * r + eps2
            w = tau * s2 ** (0.5 * p - 1.0)
            h = tau * s2 ** (0.5 * p - 2.0) * ((p - 1.0) * r * r + eps2)
            step = _weighted_ls(Phi, w * r / h, h)
            decrement = float(np.dot(h, (Phi @ step) ** 2))
            if 0.5 * p * decrement <= opts.objective_rtol * F:
                break
            t = 1.0
            F_new, r_new = smoothed(c + step)
            while F_new > F - 1e-4 * t * p * decrement and t > 1e-6:
                t *= 0.5
                F_new, r_new = smoothed(c + t * step)
            if F_new >= F:
                step = _weighted_ls(Phi, f, w) - c
                t = 1.0
                F_new, r_new = smoothed(c + step)
                while F_new > F and t > 1e-10:
                    t *= 0.5
                    F_new, r_new = smoothed(c + t * step)
                if F_new >= F:
                    break
            c = c + t * step
            rel = (F - F_new) / max(F, 1e-300)
            F, r = F_new, r_new
            if trace is not None:
                trace.append((total, discrete_objective(r, tau, p), math.sqrt(eps2)))
            if rel < opts.objective_rtol * 1e-3:
                break
        else:
            if p == 1.0 and (cv := _l1_vertex(Phi, f, tau, c)) is not None:
                return cv, discrete_objective(f - Phi @ cv, tau, p), total
            raise ConvergenceError(
                f"IRLS did not reach rtol {opts.objective_rtol} within {opts.max_iterations} iterations "
                f"at smoothing {math.sqrt(eps2):.1e}",
                objective=discrete_objective(r, tau, p),
                iterations=total,
            )
        if p == 1.0 and (cv := _l1_vertex(Phi, f, tau, c)) is not None:
            return cv, discrete_objective(f - Phi @ cv, tau, p), total
    return c, discrete_objective(f - Phi @ c, tau, p), total


def _level_solution(Phi, f, S, alpha):
    """Solve Phi_S c + sign(alpha) h = f_S; returns c and a dual lower bound.

    After projecting alpha onto the kernel of Phi_S^T, |alpha.f_S| / ||alpha||_1
    is a lower bound on the minimax value (weak duality).
    """
    m = Phi.shape[1]
    PS = Phi[S]
    sign = np.sign(alpha)
    sol = np.linalg.lstsq(np.column_stack([PS, sign]), f[S], rcond=None)[0]
    alpha = alpha - PS @ np.linalg.lstsq(PS, alpha, rcond=None)[0]
    norm1 = float(np.abs(alpha).sum())
    low = abs(float(alpha @ f[S])) / norm1 if norm1 > 0 else 0.0
    return sol[:m], low


def _vertex_polish(Phi, f):
    """Active set of the minimax linear program, solved with HiGHS.

    Only the support and signs are taken from the LP; the returned candidate
    and bound are recomputed from the level equations in double precision.
    """
    N, m = Phi.shape
    ones = np.ones((N, 1))
    A = np.block([[Phi, -ones], [-Phi, -ones]])
    b = np.concatenate([f, -f])
    cost = np.zeros(m + 1)
    cost[-1] = 1.0
    res = linprog(cost, A_ub=A, b_ub=b, bounds=[(None, None)] * m + [(0, None)], method="highs")
    if res.status != 0:
        return None, 0.0
    y = -res.ineqlin.marginals
    alpha = y[:N] - y[N:]
    S = np.flatnonzero(np.abs(alpha) > 1e-9 * np.abs(alpha).max())
    if S.size == 0:
        return res.x[:m], 0.0
    return _level_solution(Phi, f, S, alpha[S])


_LAWSON_STALL = 30


def _lawson(Phi, f, tau, opts, trace):
    """Lawson's multiplicative reweighting for the discrete minimax problem.

    Upper bound: best max residual seen. Lower bound: weak duality with the
    weighted residual, which is orthogonal to P_n. If the bounds have not met
    after a few dozen steps, the active set of the equivalent linear program
    is used once to solve the level equations exactly. Iterate until the bounds meet within
    ``objective_rtol``.
    """
    scale = float(np.max(np.abs(f))) if f.size else 1.0
    scale = scale if scale > 0 else 1.0
    v = tau / tau.sum()
    best_c, best_up = None, math.inf
    low = 0.0
    for it in range(1, opts.lawson_max_iterations + 1):
        c = _weighted_ls(Phi, f, v)
        r = f - Phi @ c
        a = np.abs(r)
        up = float(a.max())
        # v * r is orthogonal to P_n, so it certifies a lower bound.
        va = float(np.dot(v, a))
        if va > 0:
            low = max(low, float(np.dot(v, r * r)) / va)
        if up < best_up:
            best_c, best_up = c, up
        if it == _LAWSON_STALL and best_up - low > opts.objective_rtol * best_up:
            cp, lp = _vertex_polish(Phi, f)
            low = max(low, lp)
            if cp is not None:
                upp = float(np.max(np.abs(f - Phi @ cp)))
                if upp < best_up:
                    best_c, best_up = cp, upp
        if trace is not None:
            trace.append((it, best_up, best_up - low))
        if best_up <= 1e-14 * scale or best_up - low <= opts.objective_rtol * best_up:
            return best_c, best_up, it
        v = v * a
        s = v.sum()
        if not s > 0:
            return best_c, best_up, it
        v = v / s
    raise ConvergenceError(
        f"Lawson iteration stalled: gap {best_up - low:.3e} after {opts.lawson_max_iterations} iterations",
        objective=best_up,
        iterations=opts.lawson_max_iterations,
    )


def least_lp_fit(layer, samples, p=2.0, opts=None, basis=None, trace=None):
    """Weighted least l_p approximation of sampled values by P_n.

    Minimizes (sum_k tau_k |f(x_k) - g(x_k)|^p)^(1/p) over g in P_n, or the
    plain max residual for p = inf. For p in {1, inf} minimizers need not be
    unique; only the attained ``objective`` is meaningful there.
    """
    p = float(p)
    if not p >= 1.0:
        raise DomainError(f"p must be in [1, inf], got {p}")
    opts = opts or SolverOptions()
    n = layer.degree
    if basis is None:
        basis = build_basis(layer.spec, n)
    f = np.asarray(samples, dtype=float).reshape(-1)
    if f.shape[0] != len(layer):
        raise DomainError(f"{f.shape[0]} samples for a layer of {len(layer)} points")
    Phi = basis.evaluate(layer.points, n, points_normalized=True)
    tau = layer.weights
    method = opts.method or ("qr" if p == 2.0 else "lawson" if math.isinf(p) else "irls")
    if method == "qr":
        if p != 2.0:
            raise DomainError("qr solver applies to p = 2 only")
        c = _qr_fit(Phi, f, tau)
        obj, its = discrete_objective(f - Phi @ c, tau, p), 0
    elif method == "irls":
        if math.isinf(p):
            raise DomainError("irls needs finite p")
        c, obj, its = _irls(Phi, f, tau, p, opts, trace)
    elif method == "lawson":
        if not math.isinf(p):
            raise DomainError("lawson solves the p = inf problem only")
        c, obj, its = _lawson(Phi, f, tau, opts, trace)
    else:
        raise DomainError(f"unknown solver method {method!r}")
    return PolyCoeffs(basis, n, c, {"solver": method}, objective=obj, p=p, iterations=its)


def discrete_gram(layer, basis=None):
    """G[j, k] = sum_i tau_i phi_j(x_i) phi_k(x_i) over P_n."""
    if basis is None:
        basis = build_basis(layer.spec, layer.degree)
    Phi = basis.evaluate(layer.points, layer.degree, points_normalized=True)
    G = Phi.T @ (layer.weights[:, None] * Phi)
    return 0.5 * (G + G.T)


def discrete_orthonormal_basis(layer, basis=None, gram=None):
    """T with rows giving a basis of P_n orthonormal for the discrete inner product.

    T = L^{-1} where G = L L^T, so T G T^T = I.
    """
    G = discrete_gram(layer, basis) if gram is None else gram
    ev = np.linalg.eigvalsh(G)
    if ev[0] < _SINGULAR_RTOL * ev[-1]:
        raise LayerError(f"discrete Gram matrix is singular (eigenvalues {ev[0]:.3e} .. {ev[-1]:.3e})")
    Lc = np.linalg.cholesky(G)
    return sla.solve_triangular(Lc, np.eye(G.shape[0]), lower=True)


@dataclass(frozen=True, eq=False)
class ReproducingKernel:
    """D_n(x, y) = sum_j varphi_j(x) varphi_j(y) for a discrete-orthonormal basis."""

    basis: object
    degree: float
    transform: np.ndarray

    def features(self, points):
        return self.basis.evaluate(points, self.degree) @ self.transform.T

    def __call__(self, x, y):
        return self.features(x) @ self.features(y).T


def reproducing_kernel(layer, basis=None):
    if basis is None:
        basis = build_basis(layer.spec, layer.degree)
    return ReproducingKernel(basis, layer.degree, discrete_orthonormal_basis(layer, basis))


def ls_projection_matrix(layer, basis=None):
    """Matrix C with coefficients(L_n f) = C @ samples."""
    if basis is None:
        basis = build_basis(layer.spec, layer.degree)
    T = discrete_orthonormal_basis(layer, basis)
    Phi = basis.evaluate(layer.points, layer.degree, points_normalized=True)
    return T.T @ (T @ (Phi.T * layer.weights))


def apply_ls_projector(layer, samples, probe_points, basis=None):
    """L_n f(x) = sum_k tau_k f(x_k) D_n(x, x_k) at the probe points."""
    K = reproducing_kernel(layer, basis)
    D = K(probe_points, layer.points)
    return D @ (layer.weights * np.asarray(samples, dtype=float))


def _h(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def filter_value(t):
    """Smooth cutoff: 1 on [0, 1], 0 on [2, inf), h(2-t)/(h(2-t)+h(t-1)) between."""
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError("filter argument must be >= 0")
    out = np.where(arr <= 1.0, 1.0, 0.0)
    mid = (arr > 1.0) & (arr < 2.0)
    if np.any(mid):
        a = _h(2.0 - arr[mid])
        b = _h(arr[mid] - 1.0)
        out[mid] = a / (a + b)
    return float(out) if np.ndim(t) == 0 else out


def filtered_approx(f, n):
    """V_n f: coefficient k becomes eta(lambda_k / n) * f_hat(k); degree <= 2n."""
    target = 2.0 * n
    cut = min(target, f.cutoff)
    truncated = f.cutoff < target
    if truncated:
        log.info("filtered_approx: input cutoff %.6g is below 2n = %.6g", f.cutoff, target)
    m = f.basis.dim(cut)
    lam = f.basis.lambdas[:m]
    coeffs = filter_value(lam / n) * f.coeffs[:m]
    meta = dict(f.meta)
    meta.update({"filter_degree": float(n), "input_cutoff": float(f.cutoff), "truncated": bool(truncated)})
    return CoeffFunction(f.basis, cut, coeffs, meta)


def filtered_approx_from_samples(f, n, quad, basis=None, f_bandwidth=0.0):
    """V_n f with Fourier coefficients of a point evaluator taken by quadrature."""
    target = 2.0 * n
    if basis is None or basis.lambda_max < target:
        basis = build_basis(quad.spec, target)
    m = basis.dim(target)
    Phi = basis.evaluate(quad.nodes, target, points_normalized=True)
    vals = np.asarray(f(quad.nodes), dtype=float).reshape(-1)
    fhat = Phi.T @ (quad.weights * vals)
    coeffs = filter_value(basis.lambdas[:m] / n) * fhat
    meta = {"filter_degree": float(n), "quadrature_exactness": float(quad.exactness_degree)}
    need = max(target, f_bandwidth)
    if quad.exactness_degree < need:
        meta["warning"] = f"quadrature exactness {quad.exactness_degree:.6g} below required {need:.6g}"
    return CoeffFunction(basis, target, coeffs, meta)


def filter_kernel(spec, n, x, y):
    """K_n(x, y) = sum_k eta(lambda_k / n) phi_k(x) phi_k(y), summed in zonal form."""
    x = spec.normalize_points(x)
    y = spec.normalize_points(y)
    if spec.kind == "sphere":
        L = sphere_max_degree(2.0 * n)
        ell = np.arange(L + 1)
        coef = filter_value(np.sqrt(ell * (ell + 1.0)) / n) * (2 * ell + 1)
        t = np.clip(x @ y.T, -1.0, 1.0)
        return np.polynomial.legendre.legval(t, coef)
    basis = build_basis(spec, 2.0 * n)
    k = basis.indices.astype(float)
    eta = filter_value(basis.lambdas / n)
    diff = x[:, None, :] - y[None, :, :]
    phase = 2.0 * np.pi * np.tensordot(diff, k.T, axes=([2], [0]))
    return np.cos(phase) @ eta


def filter_kernel_from_basis(basis, n, x, y):
    """Same kernel summed over the real eigenbasis (slow route, for cross-checks)."""
    m = basis.dim(2.0 * n)
    eta = filter_value(basis.lambdas[:m] / n)
    return (basis.evaluate(x, 2.0 * n) * eta) @ basis.evaluate(y, 2.0 * n).T


def kernel_l1_norm(n, x, quad):
    """||K_n(x, .)||_{L_1}, integrated with the quadrature nodes."""
    vals = filter_kernel(quad.spec, n, x, quad.nodes)
    return np.abs(vals) @ quad.weights if vals.shape[0] > 1 else float(np.abs(vals[0]) @ quad.weights)
