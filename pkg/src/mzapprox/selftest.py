"""Invariant self-test suite at small, fixed problem sizes.

Each check returns a pass flag plus the measured quantities it asserted on,
so a report shows how close every invariant came to its threshold.
"""
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .approx import (
    apply_ls_projector,
    discrete_objective,
    filter_kernel,
    filter_value,
    filtered_approx,
    kernel_l1_norm,
    least_lp_fit,
    reproducing_kernel,
)
from .coeffs import CoeffFunction
from .errors import DomainError, MZError
from .experiments import ExperimentConfig, fit_slope, run_rates
from .manifold import (
    ManifoldSpec,
    build_basis,
    dim_closed_form,
    lq_norm,
    reference_quadrature,
    sphere_degree,
    torus_degree,
    uniform_points,
)
from .mz import (
    MZLayer,
    covering_radius,
    equispaced_torus_layer,
    frame_bounds,
    maximal_separated_set,
    point_separation,
    regularity_constant,
    separated_layer,
)
from .quadrature import check_quad_bound, ls_quadrature
from .spaces import SmoothnessSpec, best_approx_error, random_smooth_function, sobolev_norm

__all__ = ["CheckResult", "SelftestReport", "selftest", "check_layer_file", "CHECKS"]

CHECKS = []

T1 = ManifoldSpec.torus(1)
T2 = ManifoldSpec.torus(2)
T3 = ManifoldSpec.torus(3)
S2 = ManifoldSpec.sphere2()


def _check(module, name):
    def deco(fn):
        CHECKS.append((module, name, fn))
        return fn

    return deco


@dataclass
class CheckResult:
    module: str
    name: str
    passed: bool
    measured: dict = field(default_factory=dict)
    message: str = ""

    def line(self):
        vals = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        tail = f" ({self.message})" if self.message else ""
        return f"{'PASS' if self.passed else 'FAIL'} {self.module}/{self.name}: {vals}{tail}"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def _plain(v):
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_plain(x) for x in v]
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


@dataclass
class SelftestReport:
    seed: int
    results: list
    elapsed: float = 0.0

    @property
    def passed(self):
        return all(r.passed for r in self.results)

    @property
    def failures(self):
        return [r for r in self.results if not r.passed]

    def lines(self):
        return [r.line() for r in self.results]

    def to_json(self):
        return {
            "seed": self.seed,
            "passed": self.passed,
            "checks": [
                {"module": r.module, "name": r.name, "passed": r.passed,
                 "measured": {k: _plain(v) for k, v in r.measured.items()}, "message": r.message}
                for r in self.results
            ],
        }


class _Ctx:
    def __init__(self, seed):
        self.seed = int(seed)

    def rng(self, *tag):
        return np.random.default_rng([self.seed, *tag])


def _random_poly(basis, n, rng):
    return CoeffFunction(basis, n, rng.standard_normal(basis.dim(n)))


# ---------------------------------------------------------------- manifold-core


@_check("manifold-core", "orthonormality")
def _orthonormality(ctx):
    worst = {}
    for spec, n in ((T1, torus_degree(10)), (T2, torus_degree(4)), (T3, torus_degree(2)), (S2, sphere_degree(10))):
        quad = reference_quadrature(spec, n)
        Phi = build_basis(spec, n).evaluate(quad.nodes, n, True)
        G = Phi.T @ (quad.weights[:, None] * Phi)
        worst[spec.name] = float(np.abs(G - np.eye(G.shape[0])).max())
    return max(worst.values()) <= 1e-10, worst


@_check("manifold-core", "weyl-band")
def _weyl(ctx):
    out, ok = {}, True
    for spec, ns in ((T1, [torus_degree(m) for m in (4, 8, 16, 32)]),
                     (T2, [torus_degree(m) for m in (2, 4, 8, 16)]),
                     (S2, [sphere_degree(l) for l in (4, 8, 16, 32)])):
        x = uniform_points(spec, 20, ctx.rng(1))
        basis = build_basis(spec, ns[-1])
        lo, hi = math.inf, 0.0
        for n in ns:
            s = np.sum(basis.evaluate(x, n, True) ** 2, axis=1) / n**spec.dim
            lo, hi = min(lo, float(s.min())), max(hi, float(s.max()))
        out[spec.name] = (lo, hi)
        ok &= hi / lo <= 4.0
    return ok, {k: [v[0], v[1], v[1] / v[0]] for k, v in out.items()}


def _nikolskii_ratio(spec, n, p, q, rng):
    basis = build_basis(spec, n)
    quad = reference_quadrature(spec, 2.0 * n + 4.0)
    y = uniform_points(spec, 1, rng)
    polys = [_random_poly(basis, n, rng) for _ in range(50)]
    polys.append(CoeffFunction(basis, n, basis.evaluate(y, n)[0]))
    eta = filter_value(basis.lambdas / (0.5 * n))
    polys.append(CoeffFunction(basis, n, eta * basis.evaluate(y, n)[0]))
    scale = n ** (spec.dim * max(1.0 / p - 1.0 / q, 0.0))
    grid = quad.refined_grid(8) if math.isinf(q) else None
    best = 0.0
    for Q in polys:
        num = float(np.max(np.abs(Q(grid)))) if grid is not None else lq_norm(Q, q, quad)
        best = max(best, num / (scale * lq_norm(Q, p, quad)))
    return best


@_check("manifold-core", "nikolskii")
def _nikolskii(ctx):
    out, ok = {}, True
    for spec, ns in ((T1, [torus_degree(m) for m in (4, 8, 16)]), (S2, [sphere_degree(l) for l in (4, 8, 16)])):
        for p, q in ((2.0, math.inf), (1.0, 2.0)):
            ratios = [_nikolskii_ratio(spec, n, p, q, ctx.rng(2, i)) for i, n in enumerate(ns)]
            out[f"{spec.name}({p:g},{q:g})"] = ratios
            ok &= max(ratios) <= 2.0 * ratios[0]
    return ok, out


@_check("manifold-core", "dimension-counts")
def _dims(ctx):
    ok = True
    meas = {}
    for spec, top in ((T1, torus_degree(40)), (T2, torus_degree(12)), (T3, torus_degree(5)), (S2, sphere_degree(30))):
        basis = build_basis(spec, top)
        ns = np.linspace(0.0, top, 97)
        dims = [basis.dim(n) for n in ns]
        ok &= all(a <= b for a, b in zip(dims, dims[1:]))
        ok &= all(d == dim_closed_form(spec, n) for d, n in zip(dims, ns))
        meas[spec.name] = dims[-1]
    return ok, meas


# ---------------------------------------------------------------- mz-families


def _layers(ctx):
    return {
        "torus1-equispaced": equispaced_torus_layer(1, torus_degree(16)),
        "torus2-separated": separated_layer(T2, torus_degree(4), seed=ctx.seed),
        "sphere2-separated": separated_layer(S2, sphere_degree(8), seed=ctx.seed),
    }


@_check("mz-families", "frame-inequality")
def _frame(ctx):
    ok, meas = True, {}
    for name, layer in _layers(ctx).items():
        basis = build_basis(layer.spec, layer.degree)
        A, B, _ = frame_bounds(layer, basis)
        Phi = basis.evaluate(layer.points, layer.degree, True)
        rng = ctx.rng(3)
        worst = 0.0
        for _ in range(100):
            c = rng.standard_normal(Phi.shape[1])
            disc = float(np.dot(layer.weights, (Phi @ c) ** 2))
            cont = float(c @ c)
            worst = max(worst, (A * cont - disc) / cont, (disc - B * cont) / cont)
        meas[name] = worst
        ok &= worst <= 1e-10
    # p = inf on the equispaced torus: upper side is structural, lower side empirical
    layer = _layers(ctx)["torus1-equispaced"]
    basis = build_basis(T1, layer.degree)
    quad = reference_quadrature(T1, 2.0 * layer.degree)
    cert = frame_bounds(layer, basis, math.inf, "randomized", 200, quad, ctx.seed)
    grid = np.vstack([quad.refined_grid(8), layer.points])
    Phi, Psi = basis.evaluate(layer.points, layer.degree, True), basis.evaluate(grid, layer.degree, True)
    rng = ctx.rng(4)
    lo = math.inf
    for _ in range(100):
        c = rng.standard_normal(Phi.shape[1])
        d, s = np.abs(Phi @ c).max(), np.abs(Psi @ c).max()
        ok &= d <= s * (1.0 + 1e-12)
        lo = min(lo, d / s)
    meas["inf-ratio-min/A"] = lo / cert.A
    ok &= lo >= 0.9 * cert.A
    return ok, meas


@_check("mz-families", "kappa-uniform")
def _kappa_uniform(ctx):
    meas, ok = {}, True
    for spec, ns in ((T1, [torus_degree(m) for m in (8, 16, 32)]), (S2, [sphere_degree(l) for l in (4, 8, 16)])):
        ks = [frame_bounds(separated_layer(spec, n, seed=ctx.seed + i)).kappa for i, n in enumerate(ns)]
        meas[spec.name] = ks
        ok &= max(ks) / min(ks) < 2.0
    return ok, meas


@_check("mz-families", "weight-scaling")
def _scaling(ctx):
    layer = _layers(ctx)["sphere2-separated"]
    c = 3.7
    a = frame_bounds(layer)
    b = frame_bounds(layer.scaled(c))
    quad = reference_quadrature(S2, 2.0 * layer.degree + 4)
    ar = frame_bounds(layer, p=1.5, method="randomized", trials=30, quad=quad, seed=ctx.seed)
    br = frame_bounds(layer.scaled(c), p=1.5, method="randomized", trials=30, quad=quad, seed=ctx.seed)
    errs = [abs(b.A / (c * a.A) - 1), abs(b.B / (c * a.B) - 1), abs(b.kappa / a.kappa - 1),
            abs(br.A / (c * ar.A) - 1), abs(br.kappa / ar.kappa - 1)]
    return max(errs) <= 1e-10, {"max_rel_err": max(errs)}


@_check("mz-families", "randomized-monotone")
def _randomized(ctx):
    layer = _layers(ctx)["sphere2-separated"]
    quad = reference_quadrature(S2, 2.0 * layer.degree + 4)
    ex = frame_bounds(layer)
    certs = [frame_bounds(layer, p=2.0, method="randomized", trials=t, quad=quad, seed=ctx.seed) for t in (10, 40, 160)]
    As, Bs = [c.A for c in certs], [c.B for c in certs]
    ok = all(x >= y for x, y in zip(As, As[1:])) and all(x <= y for x, y in zip(Bs, Bs[1:]))
    ok &= As[-1] >= ex.A - 1e-10 and Bs[-1] <= ex.B + 1e-10
    return ok, {"A": As, "B": Bs, "A_exact": ex.A, "B_exact": ex.B}


@_check("mz-families", "separated-set")
def _separated(ctx):
    meas, ok = {}, True
    for spec, eps in ((T1, 0.1), (T2, 0.15), (S2, 0.4)):
        ps = maximal_separated_set(spec, eps, seed=ctx.seed)
        probes = uniform_points(spec, 4000, ctx.rng(5))
        sep = point_separation(spec, ps.points)
        cov = covering_radius(spec, ps.points, probes)
        meas[spec.name] = [len(ps), sep, cov]
        ok &= sep >= eps and cov <= eps * 1.05
    return ok, meas


@_check("mz-families", "regularity")
def _regularity(ctx):
    # balls of radius 1/n only resolve the weight density once they hold
    # several nodes; at oversampling 1 they hold 0 or 1 and the ratio is ~pi/2
    probes = uniform_points(T1, 200, ctx.rng(6))
    dense = regularity_constant(equispaced_torus_layer(1, torus_degree(16), oversampling=8.0), probes)
    sparse = regularity_constant(equispaced_torus_layer(1, torus_degree(16)), probes)
    return abs(dense - 1.0) <= 0.2, {"oversampling8": dense, "oversampling1": sparse}


# ---------------------------------------------------------------- approx-operators


def _fit_layers(ctx):
    return {
        "torus1": equispaced_torus_layer(1, torus_degree(6), oversampling=3.0),
        "sphere2": separated_layer(S2, sphere_degree(4), delta=1.2, seed=ctx.seed),
    }


def _smooth(spec, x):
    if spec.kind == "torus":
        return np.exp(np.cos(2 * np.pi * x[:, 0])) + np.abs(np.sin(np.pi * x[:, 0]))
    return np.exp(x[:, 0]) + np.abs(x[:, 2])


P_LIST = (1.0, 1.5, 2.0, 4.0, math.inf)


@_check("approx-operators", "minimality")
def _minimality(ctx):
    worst = -math.inf
    for name, layer in _fit_layers(ctx).items():
        basis = build_basis(layer.spec, layer.degree)
        Phi = basis.evaluate(layer.points, layer.degree, True)
        f = _smooth(layer.spec, layer.points)
        rng = ctx.rng(7)
        for p in P_LIST:
            fit = least_lp_fit(layer, f, p, basis=basis)
            for j in range(20):
                step = 10.0 ** -(j % 5) * rng.standard_normal(Phi.shape[1])
                comp = discrete_objective(f - Phi @ (fit.coeffs + step), layer.weights, p)
                worst = max(worst, (fit.objective - comp) / comp)
    return worst <= 1e-9, {"max_rel_excess": worst}


@_check("approx-operators", "shift-covariance")
def _shift(ctx):
    worst = 0.0
    for name, layer in _fit_layers(ctx).items():
        basis = build_basis(layer.spec, layer.degree)
        f = _smooth(layer.spec, layer.points)
        Q = _random_poly(basis, layer.degree, ctx.rng(8))
        for p in P_LIST:
            a = least_lp_fit(layer, f, p, basis=basis).objective
            b = least_lp_fit(layer, f + Q(layer.points), p, basis=basis).objective
            worst = max(worst, abs(a - b) / a)
    return worst <= 1e-7, {"max_rel_diff": worst}


@_check("approx-operators", "reproduction")
def _reproduction(ctx):
    worst2, worst_it, worst_k = 0.0, 0.0, 0.0
    for name, layer in _fit_layers(ctx).items():
        basis = build_basis(layer.spec, layer.degree)
        probes = uniform_points(layer.spec, 50, ctx.rng(9))
        K = reproducing_kernel(layer, basis)
        Dk = K(probes, layer.points)
        rng = ctx.rng(10)
        for i in range(20):
            Q = _random_poly(basis, layer.degree, rng)
            vals = Q(layer.points)
            truth = Q(probes)
            worst_k = max(worst_k, float(np.abs(Dk @ (layer.weights * vals) - truth).max()))
            for p in P_LIST if i < 4 else (2.0,):
                fit = least_lp_fit(layer, vals, p, basis=basis)
                err = float(np.abs(fit(probes) - truth).max())
                if p == 2.0:
                    worst2 = max(worst2, err)
                else:
                    worst_it = max(worst_it, err)
    ok = worst2 <= 1e-8 and worst_it <= 1e-6 and worst_k <= 1e-8
    return ok, {"p2": worst2, "iterative": worst_it, "kernel": worst_k}


@_check("approx-operators", "p2-route-equivalence")
def _routes(ctx):
    worst = 0.0
    for name, layer in _fit_layers(ctx).items():
        f = _smooth(layer.spec, layer.points)
        probes = uniform_points(layer.spec, 50, ctx.rng(11))
        a = apply_ls_projector(layer, f, probes)
        b = least_lp_fit(layer, f, 2.0)(probes)
        worst = max(worst, float(np.abs(a - b).max()))
    return worst <= 1e-8, {"max_abs_diff": worst}


@_check("approx-operators", "filter")
def _filter(ctx):
    t = np.arange(0.0, 3.0, 1e-3)
    eta = filter_value(t)
    mono = bool(np.all(np.diff(eta) <= 0))
    h = 1e-4
    jumps = [abs(filter_value(1 + h) - 1.0), abs(filter_value(2 - h)),
             abs((filter_value(1 + h) - 1.0) / h), abs(filter_value(2 - h) / h)]
    basis = build_basis(T1, torus_degree(24))
    f = _random_poly(basis, torus_degree(24), ctx.rng(12))
    n = torus_degree(8)
    out = filtered_approx(f, n)
    k = len(out.coeffs)
    sandwich = bool(np.all(np.abs(out.coeffs) <= np.abs(f.coeffs[:k]) + 1e-15))
    m = basis.dim(n)
    exact_low = bool(np.array_equal(out.coeffs[:m], f.coeffs[:m]))
    Q = _random_poly(basis, n, ctx.rng(13))
    vq = float(np.abs(filtered_approx(Q, n).padded(len(Q.coeffs)) - Q.coeffs).max())
    ok = mono and max(jumps) <= 1e-6 and sandwich and exact_low and vq <= 1e-12
    return ok, {"monotone": mono, "join_jump": max(jumps), "sandwich": sandwich, "VnQ-Q": vq}


@_check("approx-operators", "kernel-localization")
def _localization(ctx):
    ratios = []
    x0 = np.zeros((1, 1))
    for m in (8, 16, 32):
        n = torus_degree(m)
        near = abs(float(filter_kernel(T1, n, x0, np.array([[1.0 / n]]))[0, 0]))
        far_pts = np.linspace(20.0 / n, 0.5, 2000)[:, None]
        far = float(np.abs(filter_kernel(T1, n, x0, far_pts)).max())
        ratios.append(near / far)
    return min(ratios) >= 10.0, {"near/far": ratios}


@_check("approx-operators", "kernel-l1-bounded")
def _kernel_l1(ctx):
    meas, ok = {}, True
    for spec, ns in ((T1, [torus_degree(m) for m in (4, 8, 16, 32)]), (S2, [sphere_degree(l) for l in (2, 4, 8, 16)])):
        quad = reference_quadrature(spec, 4.0 * ns[-1] + 8.0)
        probes = uniform_points(spec, 10, ctx.rng(14))
        vals = [float(np.max(kernel_l1_norm(n, probes, quad))) for n in ns]
        meas[spec.name] = vals
        ok &= max(vals) / min(vals) < 1.5
    return ok, meas


# ---------------------------------------------------------------- quadrature


def _quad_layers(ctx):
    return {
        "torus1-equispaced": equispaced_torus_layer(1, torus_degree(12)),
        "torus2-separated": separated_layer(T2, torus_degree(3), seed=ctx.seed),
        "sphere2-separated": separated_layer(S2, sphere_degree(8), seed=ctx.seed),
    }


@_check("quadrature", "exactness")
def _exactness(ctx):
    meas = {}
    for name, layer in _quad_layers(ctx).items():
        basis = build_basis(layer.spec, layer.degree)
        rule = ls_quadrature(layer, basis)
        I = basis.evaluate(layer.points, layer.degree, True).T @ rule.weights
        I[0] -= 1.0
        meas[name] = float(np.abs(I).max())
    return max(meas.values()) <= 1e-10, meas


@_check("quadrature", "error-bound")
def _quad_bound(ctx):
    worst = -math.inf
    for name, layer in _quad_layers(ctx).items():
        basis = build_basis(layer.spec, 4.0 * layer.degree)
        basis_n = build_basis(layer.spec, layer.degree)
        rule = ls_quadrature(layer, basis_n)
        rng = ctx.rng(15)
        for _ in range(50):
            f = _random_poly(basis, 4.0 * layer.degree, rng)
            lhs, rhs = check_quad_bound(f, layer, rule, basis=basis_n)
            worst = max(worst, lhs - rhs)
    return worst <= 1e-8, {"max(lhs-rhs)": worst}


@_check("quadrature", "route-equivalence")
def _quad_routes(ctx):
    gaps = {name: ls_quadrature(layer).meta["route_gap"] for name, layer in _quad_layers(ctx).items()}
    return max(gaps.values()) <= 1e-12, gaps


@_check("quadrature", "weight-signs")
def _quad_signs(ctx):
    layers = _quad_layers(ctx)
    eq = ls_quadrature(layers["torus1-equispaced"])
    sph = ls_quadrature(layers["sphere2-separated"])
    return bool(np.all(eq.weights > 0)), {"equispaced_min_w": float(eq.weights.min()),
                                          "sphere_negative_fraction": sph.negative_fraction}


# ---------------------------------------------------------------- function-spaces


@_check("function-spaces", "best-approx-monotone")
def _ba_monotone(ctx):
    cut = torus_degree(16)
    f = random_smooth_function(T1, 2.0, 2.0, cut, seed=ctx.seed)
    ns = [torus_degree(m) for m in (1, 2, 4, 8, 16)]
    e2 = [best_approx_error(f, n, 2.0) for n in ns]
    fine = equispaced_torus_layer(1, cut, oversampling=4.0)
    quad = reference_quadrature(T1, 4.0 * cut)
    fine = fine.certified(frame_bounds(fine, p=1.5, method="randomized", trials=50, quad=quad, seed=ctx.seed))
    e15 = [best_approx_error(f, n, 1.5, fine, quad=quad) for n in ns]
    ok = all(b <= a for a, b in zip(e2, e2[1:])) and all(b <= a * (1 + 1e-9) for a, b in zip(e15, e15[1:]))
    return ok, {"E_2": e2, "E_1.5": e15}


@_check("function-spaces", "jackson")
def _jackson(ctx):
    r = 2.0
    f = random_smooth_function(T1, r, 2.0, torus_degree(256), seed=ctx.seed)
    vals = [n**r * best_approx_error(f, n, 2.0) for n in (torus_degree(m) for m in (4, 8, 16, 32, 64))]
    return max(vals) <= 3.0 * vals[0], {"n^r E_n": vals}


@_check("function-spaces", "filtered-error-bound")
def _prop23(ctx):
    r = 2.0
    cut = torus_degree(128)
    f = random_smooth_function(T1, r, 2.0, cut, seed=ctx.seed)
    quad = reference_quadrature(T1, 2.0 * cut)
    meas, ok = {}, True
    for q in (2.0, math.inf):
        vals = []
        for m in (4, 8, 16, 32):
            n = torus_degree(m)
            res = f - filtered_approx(f, n)
            err = res.l2_norm() if q == 2.0 else lq_norm(res, q, quad)
            vals.append(err * n ** (r - (0.5 if math.isinf(q) else 0.0)))
        meas[f"q={q:g}"] = vals
        ok &= max(vals) <= 3.0 * vals[0]
    return ok, meas


@_check("function-spaces", "embedding-guard")
def _guard(ctx):
    rejected = []
    for kw in ({"space": "sobolev", "p": 2.0, "r": 0.5, "dim": 1}, {"space": "sobolev", "p": 1.0, "r": 2.0, "dim": 2},
               {"space": "besov", "p": 2.0, "r": 2.0, "tau": 0.05, "dim": 1}):
        try:
            SmoothnessSpec(**kw)
            rejected.append(False)
        except DomainError:
            rejected.append(True)
    SmoothnessSpec("sobolev", 2.0, 0.51, dim=1)
    return all(rejected), {"rejected": rejected}


@_check("function-spaces", "sobolev-parseval")
def _parseval(ctx):
    basis = build_basis(S2, sphere_degree(10))
    f = _random_poly(basis, sphere_degree(10), ctx.rng(16))
    quad = reference_quadrature(S2, sphere_degree(10))
    a = sobolev_norm(f, 2.0, 1.5, quad)
    b = float(np.sqrt(np.sum((1 + f.lambdas**2) ** 1.5 * f.coeffs**2)))
    return abs(a - b) <= 1e-12 * b, {"rel_diff": abs(a - b) / b}


# ---------------------------------------------------------------- experiments


@_check("experiments", "rates-report")
def _rates(ctx):
    cfg = ExperimentConfig(manifold="torus1", degrees=[torus_degree(m) for m in (4, 6, 8, 11, 16)], r=2.0,
                           functions=3, seed=ctx.seed, cutoff_factor=3.0)
    a = run_rates(cfg)
    b = run_rates(cfg)
    same = a.to_csv() == b.to_csv()
    ok = same and all(a.flags[k] for k in ("kappa_stable", "error_monotone", "quad_below_L2"))
    return ok, {"identical_csv": same, **a.flags, "slope": a.slope}


@_check("experiments", "fit-slope")
def _slope(ctx):
    ns = [2.0, 4.0, 8.0, 16.0]
    s = fit_slope([(n, 5.0 * n**-3.0) for n in ns])
    flat = fit_slope([(n, 0.1) for n in ns])
    ok = abs(s.slope + 3.0) <= 1e-10 and s.r_squared == 1.0 and flat.slope == 0.0
    return ok, {"slope": s.slope, "r2": s.r_squared, "flat": flat.slope}


# ---------------------------------------------------------------- layer files


def check_layer_file(path):
    """Invariant checks for a point-set JSON file, one result per named invariant."""
    mod = f"layer-file:{path}"
    try:
        with open(path) as fh:
            obj = json.load(fh)
        spec = ManifoldSpec.parse(obj["manifold"])
        pts = np.asarray(obj["points"], dtype=np.float64)
        w = np.asarray(obj["weights"], dtype=np.float64)
        n = float(obj["n"])
    except (OSError, ValueError, KeyError, TypeError) as exc:
        return [CheckResult(mod, "readable", False, {}, str(exc))]
    out = [CheckResult(mod, "readable", True)]
    same = len(pts) == len(w)
    out.append(CheckResult(mod, "length-match", same, {"points": len(pts), "weights": len(w)}))
    pos = bool(np.all(np.isfinite(w)) and np.all(w > 0))
    out.append(CheckResult(mod, "positive-weights", pos, {"min_weight": float(np.min(w)) if w.size else math.nan},
                           "" if pos else "MZLayer invariant 'positive-weights' violated"))
    need = dim_closed_form(spec, n)
    out.append(CheckResult(mod, "dimension", len(pts) >= need, {"points": len(pts), "dim": need}))
    try:
        spec.normalize_points(pts)
        valid = True
        msg = ""
    except DomainError as exc:
        valid, msg = False, str(exc)
    out.append(CheckResult(mod, "valid-points", valid, {}, msg))
    certs = obj.get("certificate", [])
    certs = [certs] if isinstance(certs, dict) else certs
    mass = float(np.sum(w))
    for c in certs:
        A, B = float(c["A"]), float(c["B"])
        ok = A <= B and A - 1e-9 * B <= mass <= B * (1 + 1e-9)
        out.append(CheckResult(mod, f"certificate-mass(p={c['p']})", ok, {"A": A, "B": B, "sum_tau": mass}))
    if all(r.passed for r in out):
        try:
            layer = MZLayer(spec, n, spec.normalize_points(pts), w)
            if not certs:
                cert = frame_bounds(layer)
                out.append(CheckResult(mod, "mz-at-degree", True, {"A": cert.A, "B": cert.B, "kappa": cert.kappa}))
        except MZError as exc:
            out.append(CheckResult(mod, "mz-at-degree", False, {}, str(exc)))
    return out


def _run_one(module, name, fn, ctx):
    try:
        ok, measured = fn(ctx)
        return CheckResult(module, name, bool(ok), measured)
    except Exception as exc:  # a crashing check is a failed check
        return CheckResult(module, name, False, {}, f"{type(exc).__name__}: {exc}")


def selftest(seed=0, threads=1, layer_files=(), only=None, log=None):
    """Run every registered invariant check (or those whose module/name contains ``only``)."""
    ctx = _Ctx(seed)
    todo = [(m, n, f) for m, n, f in CHECKS if only is None or only in f"{m}/{n}"]
    t0 = time.perf_counter()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda c: _run_one(*c, ctx), todo))
    else:
        results = [_run_one(*c, ctx) for c in todo]
    for path in layer_files:
        results.extend(check_layer_file(path))
    if log:
        for r in results:
            log(r.line())
    return SelftestReport(int(seed), results, time.perf_counter() - t0)
