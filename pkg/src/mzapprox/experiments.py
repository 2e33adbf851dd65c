"""Convergence-rate experiments: fit, integrate and measure errors over a degree schedule."""
import csv
import dataclasses
import hashlib
import io
import json
import math
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy
import scipy.sparse.linalg as spla

from . import __version__
from .approx import SolverOptions, least_lp_fit, ls_projection_matrix
from .errors import DomainError, LayerError, MZError
from .manifold import (
    ManifoldSpec,
    build_basis,
    reference_quadrature,
    sphere_degree,
    torus_degree,
    uniform_points,
)
from .mz import DEFAULT_DELTA, equispaced_torus_layer, frame_bounds, separated_layer
from .quadrature import ls_quadrature
from .spaces import SmoothnessSpec, besov_norm, peaked_function, random_smooth_function, sobolev_norm

__all__ = [
    "ExperimentConfig",
    "RateRow",
    "RateReport",
    "SlopeFit",
    "CSV_COLUMNS",
    "run_rates",
    "fit_slope",
    "predicted_exponents",
    "derive_seed",
]

CSV_COLUMNS = ("n", "dim", "N_n", "kappa", "err_Lq", "err_quad", "predicted_exponent")
# cache basis tables on reference grids up to this many entries
_CACHE_ENTRIES = 60_000_000
_DENSE_SVD_DIM = 1600
DEFAULT_SCHEDULE = {
    "torus": (torus_degree(8), torus_degree(128)),
    "sphere": (sphere_degree(4), sphere_degree(32)),
}


def _as_p(x):
    return math.inf if str(x).lower() in ("inf", "infinity") else float(x)


def _p_json(x):
    return "inf" if math.isinf(x) else x


@dataclass
class ExperimentConfig:
    """One rate experiment.

    ``degrees`` may be given explicitly; otherwise the schedule is geometric
    with ratio ``growth`` from ``n0`` to ``n_max``. The function suite holds
    ``functions`` seeded random unit-ball members, optionally a peaked one,
    and (p = 2, Sobolev) the exact worst cases of the unit ball of H^r
    restricted to degree ``cutoff_factor * n_max``, recomputed per degree.
    """

    manifold: str = "torus1"
    family: str = "equispaced"
    delta: float = None
    oversampling: float = 1.0
    p: float = 2.0
    q: float = 2.0
    r: float = 3.0
    tau: float = math.inf
    space: str = "sobolev"
    degrees: list = None
    n0: float = None
    n_max: float = None
    growth: float = math.sqrt(2.0)
    functions: int = 10
    peaked: bool = True
    extremal: bool = True
    cutoff_factor: float = 4.0
    seed: int = 0
    trials: int = 200
    sup_grid_factor: int = 8
    solver: dict = field(default_factory=dict)
    csv_path: str = None
    json_path: str = None

    def __post_init__(self):
        self.p = _as_p(self.p)
        self.q = _as_p(self.q)
        self.tau = _as_p(self.tau)
        self.spec_obj = ManifoldSpec.parse(self.manifold)
        if self.family not in ("equispaced", "separated"):
            raise DomainError(f"unknown layer family {self.family!r}")
        if self.family == "equispaced" and self.spec_obj.kind != "torus":
            raise DomainError("equispaced layers exist on the torus only")
        if not self.q >= 1.0:
            raise DomainError("q must be in [1, inf]")
        self.smoothness = SmoothnessSpec(self.space, self.p, self.r, self.tau, self.spec_obj.dim)
        if self.functions < 0 or self.cutoff_factor < 1.0 or self.growth <= 1.0:
            raise DomainError("functions >= 0, cutoff_factor >= 1 and growth > 1 are required")
        if self.functions == 0 and not (self.peaked or self.extremal):
            raise DomainError("empty function suite")
        sched = self.schedule()
        if len(sched) < 4:
            raise DomainError(f"schedule has {len(sched)} degrees; at least 4 are needed for a slope")
        if any(b <= a for a, b in zip(sched, sched[1:])) or sched[0] <= 0:
            raise DomainError("degree schedule must be positive and strictly ascending")
        self.solver_options()

    def schedule(self):
        if self.degrees is not None:
            return [float(n) for n in self.degrees]
        lo, hi = DEFAULT_SCHEDULE[self.spec_obj.kind]
        n0 = lo if self.n0 is None else float(self.n0)
        top = hi if self.n_max is None else float(self.n_max)
        out = []
        n = n0
        while n <= top * (1.0 + 1e-12):
            out.append(n)
            n *= self.growth
        return out

    def solver_options(self):
        return SolverOptions(**self.solver)

    @property
    def cutoff(self):
        return self.cutoff_factor * self.schedule()[-1]

    def to_json(self):
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            out[f.name] = _p_json(v) if isinstance(v, float) else v
        return out

    @classmethod
    def from_json(cls, obj):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise DomainError(f"unknown config keys: {sorted(unknown)}")
        return cls(**obj)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def digest(self):
        payload = {k: v for k, v in self.to_json().items() if k not in ("csv_path", "json_path")}
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r_squared: float
    used: int
    excluded: int = 0

    def __iter__(self):
        return iter((self.slope, self.intercept, self.r_squared))


def fit_slope(pairs):
    """Least-squares line through (log n, log err); non-positive errors are dropped."""
    arr = np.asarray([(float(n), float(e)) for n, e in pairs], dtype=np.float64).reshape(-1, 2)
    good = (arr[:, 1] > 0) & np.isfinite(arr[:, 1]) & (arr[:, 0] > 0)
    if good.sum() < 3:
        raise DomainError(f"need >= 3 positive (n, error) pairs, got {int(good.sum())}")
    x = np.log(arr[good, 0])
    y = np.log(arr[good, 1])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    if ss_tot <= 1e-30 * max(1.0, float(np.sum(y * y))):
        # flat data: the line is exact
        slope, intercept, r2 = 0.0, float(y.mean()), 1.0
    else:
        r2 = max(0.0, 1.0 - ss_res / ss_tot)
    return SlopeFit(float(slope), float(intercept), float(r2), int(good.sum()), int((~good).sum()))


def predicted_exponents(d, p, q, r):
    """(approximation exponent -r + d (1/p - 1/q)_+, quadrature exponent -r)."""
    gap = max(1.0 / p - (0.0 if math.isinf(q) else 1.0 / q), 0.0)
    return -r + d * gap, -r


def derive_seed(*parts):
    """Stable 32-bit seed from integers and floats (floats rounded to 1e-9)."""
    ints = [int(round(x * 1e9)) if isinstance(x, float) else int(x) for x in parts]
    return int(np.random.SeedSequence([abs(i) for i in ints]).generate_state(1)[0])


@dataclass(frozen=True)
class RateRow:
    n: float
    dim: int
    N_n: int
    kappa: float
    err_Lq: float
    err_quad: float
    predicted_exponent: float
    err_L2: float
    kappa2: float
    negative_weights: float
    worst: dict

    def csv_values(self):
        return [repr(float(self.n)), str(self.dim), str(self.N_n), repr(float(self.kappa)),
                repr(float(self.err_Lq)), repr(float(self.err_quad)), repr(float(self.predicted_exponent))]


@dataclass
class RateReport:
    rows: list
    approx_fit: SlopeFit
    quad_fit: SlopeFit
    predicted: float
    predicted_quad: float
    flags: dict
    metadata: dict

    @property
    def slope(self):
        return self.approx_fit.slope

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in self.rows:
            w.writerow(row.csv_values())
        return buf.getvalue()

    def to_json(self):
        def fit_json(f):
            return {"slope": f.slope, "intercept": f.intercept, "r_squared": f.r_squared,
                    "used": f.used, "excluded": f.excluded}

        return {
            "rows": [dataclasses.asdict(r) for r in self.rows],
            "approximation": {"predicted_exponent": self.predicted, **fit_json(self.approx_fit)},
            "quadrature": {"predicted_exponent": self.predicted_quad, **fit_json(self.quad_fit)},
            "flags": self.flags,
            "metadata": self.metadata,
        }

    def write(self, csv_path=None, json_path=None):
        if csv_path:
            with open(csv_path, "w") as fh:
                fh.write(self.to_csv())
        if json_path:
            with open(json_path, "w") as fh:
                json.dump(self.to_json(), fh, indent=1, sort_keys=True)


class _GridTable:
    """Basis values on a fixed point set, cached when small enough."""

    def __init__(self, basis, cutoff, points, weights=None):
        self.basis, self.cutoff, self.points, self.weights = basis, cutoff, points, weights
        m = basis.dim(cutoff)
        self.table = basis.evaluate(points, cutoff, True) if len(points) * m <= _CACHE_ENTRIES else None

    def values(self, coeffs, chunk=20_000):
        if self.table is not None:
            return self.table @ coeffs
        out = np.empty(len(self.points))
        for s in range(0, len(self.points), chunk):
            out[s : s + chunk] = self.basis.evaluate(self.points[s : s + chunk], self.cutoff, True) @ coeffs
        return out


class _Context:
    """Shared read-only state of one experiment."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.spec = cfg.spec_obj
        self.cutoff = cfg.cutoff
        self.basis = build_basis(self.spec, self.cutoff)
        self.dimM = self.basis.dim(self.cutoff)
        self.scale = (1.0 + self.basis.lambdas[: self.dimM] ** 2) ** (-0.5 * cfg.r)
        self.need_quad = cfg.q != 2.0 or (cfg.p != 2.0)
        self.quad = reference_quadrature(self.spec, 2.0 * self.cutoff) if self.need_quad else None
        self.nodes = self.grid = None
        if self.quad is not None:
            self.nodes = _GridTable(self.basis, self.cutoff, self.quad.nodes, self.quad.weights)
            if math.isinf(cfg.q):
                self.grid = _GridTable(self.basis, self.cutoff, self.quad.refined_grid(cfg.sup_grid_factor))
        self.suite = self._fixed_suite()

    def _normalize(self, f):
        cfg = self.cfg
        if cfg.space == "besov":
            jmax = int(math.ceil(math.log2(max(self.cutoff, 1.0))))
            return f.coeffs / besov_norm(f, cfg.p, cfg.tau, cfg.r, jmax, quad=self.quad) if cfg.p == 2.0 else None
        return f.coeffs / sobolev_norm(f, cfg.p, cfg.r, None if cfg.p == 2.0 else self.quad)

    def _fixed_suite(self):
        cfg = self.cfg
        out = []
        for i in range(cfg.functions):
            f = random_smooth_function(self.spec, cfg.r, cfg.p, self.cutoff, derive_seed(cfg.seed, 1, i),
                                       self.quad, self.basis)
            c = self._normalize(f)
            if c is None:
                raise DomainError("Besov normalization is implemented for p = 2 only")
            out.append((f"random{i}", c))
        if cfg.peaked:
            center = uniform_points(self.spec, 1, np.random.default_rng(derive_seed(cfg.seed, 2)))
            f = peaked_function(self.spec, cfg.r, self.cutoff, center, self.basis)
            c = self._normalize(f)
            if c is not None:
                out.append(("peaked", c))
        return out

    def err_lq(self, res):
        q = self.cfg.q
        if q == 2.0:
            return float(np.linalg.norm(res))
        if math.isinf(q):
            return float(np.max(np.abs(self.grid.values(res))))
        vals = np.abs(self.nodes.values(res))
        return float(np.dot(self.quad.weights, vals**q) ** (1.0 / q))


def _layer_for(cfg, spec, n):
    if cfg.family == "equispaced":
        return equispaced_torus_layer(spec.dim, n, cfg.oversampling)
    delta = DEFAULT_DELTA[spec.kind] if cfg.delta is None else cfg.delta
    return separated_layer(spec, n, delta, seed=derive_seed(cfg.seed, 3, n))


def _top_right_singular(M):
    if M.shape[1] <= _DENSE_SVD_DIM:
        return np.linalg.svd(M)[2][0]
    v = spla.svds(M, k=1, random_state=0, solver="arpack")[2][0]
    return v


def _extremal_suite(ctx, Phi_X, C, rule_w):
    """Exact worst cases over {f in P_M : ||f||_{H^r} <= 1} for the linear p = 2 pipeline."""
    s = ctx.scale
    out = []
    # quadrature functional: a -> (e_0 - Phi_X^T w) . a
    g = -(Phi_X.T @ rule_w)
    g[0] += 1.0
    g = s * g
    gn = np.linalg.norm(g)
    if gn > 0:
        out.append(("extremal_quad", s * (g / gn)))
    # residual operator E = I - pad(C Phi_X), acting on a = s * b
    P = C @ Phi_X
    ES = -P * s[None, :]
    ES = np.vstack([ES, np.zeros((ctx.dimM - P.shape[0], ctx.dimM))])
    ES[np.arange(ctx.dimM), np.arange(ctx.dimM)] += s
    b = _top_right_singular(ES)
    out.append(("extremal_L2", s * b))
    if math.isinf(ctx.cfg.q):
        best, bi = -1.0, None
        tab = ctx.nodes
        for st in range(0, len(tab.points), 4096):
            rows = (tab.table[st : st + 4096] if tab.table is not None
                    else ctx.basis.evaluate(tab.points[st : st + 4096], ctx.cutoff, True))
            psi = rows @ ES
            nr = np.einsum("ij,ij->i", psi, psi)
            i = int(np.argmax(nr))
            if nr[i] > best:
                best, bi = float(nr[i]), psi[i]
        if best > 0:
            out.append(("extremal_Lq", s * (bi / math.sqrt(best))))
    return out


def _degree_row(ctx, n):
    cfg = ctx.cfg
    spec = ctx.spec
    try:
        layer = _layer_for(cfg, spec, n)
        basis_n = build_basis(spec, n)
        cert2 = frame_bounds(layer, basis_n, 2.0, "exact2")
        if cfg.p == 2.0:
            cert = cert2
        else:
            qn = reference_quadrature(spec, 2.0 * n + 4.0)
            cert = frame_bounds(layer, basis_n, cfg.p, "randomized", cfg.trials, qn, derive_seed(cfg.seed, 4, n),
                                cfg.sup_grid_factor)
        layer = layer.certified(cert2)
        if cert is not cert2:
            layer = layer.certified(cert)
        rule = ls_quadrature(layer, basis_n)
    except MZError as exc:
        raise LayerError(f"layer certification failed at degree n = {n:.6g}: {exc}") from exc
    Phi_X = ctx.basis.evaluate(layer.points, ctx.cutoff, True)
    suite = list(ctx.suite)
    if cfg.extremal and cfg.p == 2.0 and cfg.space == "sobolev":
        C = ls_projection_matrix(layer, basis_n)
        suite += _extremal_suite(ctx, Phi_X, C, rule.weights)
    opts = cfg.solver_options()
    worst = {"err_Lq": (0.0, None), "err_quad": (0.0, None), "err_L2": (0.0, None)}
    for name, a in suite:
        samples = Phi_X @ a
        fit = least_lp_fit(layer, samples, cfg.p, opts, basis_n)
        res = a.copy()
        res[: len(fit.coeffs)] -= fit.coeffs
        errs = {
            "err_Lq": ctx.err_lq(res),
            "err_quad": abs(a[0] - rule.integrate(samples)),
            "err_L2": float(np.linalg.norm(res)),
        }
        for key, val in errs.items():
            if val > worst[key][0]:
                worst[key] = (val, name)
    pred, _ = predicted_exponents(spec.dim, cfg.p, cfg.q, cfg.r)
    return RateRow(
        n=float(n),
        dim=basis_n.dim(n),
        N_n=len(layer),
        kappa=float(cert.kappa),
        err_Lq=worst["err_Lq"][0],
        err_quad=worst["err_quad"][0],
        predicted_exponent=pred,
        err_L2=worst["err_L2"][0],
        kappa2=float(cert2.kappa),
        negative_weights=rule.negative_fraction,
        worst={k: v[1] for k, v in worst.items()},
    )


def run_rates(config, threads=1):
    """Run the rate experiment and assemble the report (rows sorted by n)."""
    cfg = config
    ctx = _Context(cfg)
    sched = cfg.schedule()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda n: _degree_row(ctx, n), sched))
    else:
        rows = [_degree_row(ctx, n) for n in sched]
    rows.sort(key=lambda r: r.n)
    approx_fit = fit_slope([(r.n, r.err_Lq) for r in rows])
    quad_fit = fit_slope([(r.n, r.err_quad) for r in rows])
    pred, pred_q = predicted_exponents(ctx.spec.dim, cfg.p, cfg.q, cfg.r)
    k2 = [r.kappa2 for r in rows]
    kappa_stable = max(k2) / min(k2) < 2.0
    monotone = all(b.err_Lq <= 1.2 * a.err_Lq for a, b in zip(rows, rows[1:]))
    flags = {
        "kappa_stable": bool(kappa_stable),
        "slope_reliable": bool(kappa_stable),
        "error_monotone": bool(monotone),
        "quad_below_L2": bool(all(r.err_quad <= r.err_L2 + 1e-12 for r in rows)),
    }
    meta = {
        "config": cfg.to_json(),
        "config_hash": cfg.digest(),
        "seed": cfg.seed,
        "suite_size": len(ctx.suite),
        "extremal": bool(cfg.extremal and cfg.p == 2.0 and cfg.space == "sobolev"),
        "cutoff": ctx.cutoff,
        "cutoff_dim": ctx.dimM,
        "versions": {"mzapprox": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
    }
    report = RateReport(rows, approx_fit, quad_fit, pred, pred_q, flags, meta)
    report.write(cfg.csv_path, cfg.json_path)
    return report

