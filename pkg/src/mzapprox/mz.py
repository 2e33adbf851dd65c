"""Marcinkiewicz-Zygmund layers: construction, weights and certification."""
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from . import kernels
from .errors import ConstructionError, DomainError, LayerError, ResourceError
from .manifold import (
    ManifoldSpec,
    build_basis,
    dim_closed_form,
    geodesic_distance,
    reference_quadrature,
    torus_max_frequency,
    uniform_points,
)

__all__ = [
    "PointSet",
    "Certificate",
    "MZLayer",
    "DEFAULT_DELTA",
    "MAX_LAYER_POINTS",
    "equispaced_torus_layer",
    "maximal_separated_set",
    "voronoi_weights",
    "mz_layer",
    "separated_layer",
    "frame_bounds",
    "regularity_constant",
    "layer_to_json",
    "layer_from_json",
    "save_layer",
    "load_layer",
    "point_separation",
    "covering_radius",
]

# separation scale delta in eps = delta / n
DEFAULT_DELTA = {"torus": 0.5, "sphere": 0.6}
MAX_LAYER_POINTS = 2_000_000
MAX_CANDIDATE_POOL = 5_000_000


@dataclass(frozen=True, eq=False)
class PointSet:
    spec: ManifoldSpec
    points: np.ndarray
    separation: float
    covering_radius: float
    probe_size: int = 0

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class Certificate:
    """Measured frame bounds for one p; ``method`` says how they were obtained."""

    p: float
    A: float
    B: float
    kappa: float
    method: str
    trials: int = 0
    seed: int = 0

    def __iter__(self):
        return iter((self.A, self.B, self.kappa))

    def to_json(self):
        return {
            "p": _p_to_json(self.p),
            "A": self.A,
            "B": self.B,
            "kappa": self.kappa,
            "method": self.method,
            "trials": self.trials,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj):
        return cls(_p_from_json(obj["p"]), float(obj["A"]), float(obj["B"]), float(obj["kappa"]),
                   str(obj["method"]), int(obj.get("trials", 0)), int(obj.get("seed", 0)))


def _p_to_json(p):
    return "inf" if math.isinf(p) else float(p)


def _p_from_json(p):
    return math.inf if str(p).lower() in ("inf", "infinity") else float(p)


@dataclass(frozen=True, eq=False)
class MZLayer:
    """One layer X_n: nodes, positive weights tau and the degree n they serve."""

    spec: ManifoldSpec
    degree: float
    points: np.ndarray
    weights: np.ndarray
    certificates: tuple = field(default=())

    def __post_init__(self):
        _check_layer(self.spec, self.degree, self.points, self.weights)

    def __len__(self):
        return len(self.weights)

    def certificate(self, p=2.0):
        for cert in self.certificates:
            if cert.p == p:
                return cert
        return None

    def certified(self, cert):
        others = tuple(c for c in self.certificates if c.p != cert.p)
        return replace(self, certificates=others + (cert,))

    def scaled(self, c):
        return MZLayer(self.spec, self.degree, self.points, self.weights * c)


def _check_layer(spec, degree, points, weights):
    if len(points) != len(weights):
        raise LayerError(f"weights/points length mismatch: {len(weights)} weights, {len(points)} points")
    if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
        raise LayerError("MZLayer invariant 'positive-weights' violated: every weight must be > 0")
    need = dim_closed_form(spec, degree)
    if len(points) < need:
        raise LayerError(f"layer has {len(points)} points but dim P_n = {need} at degree {degree}")


def _ambient_tree(spec, points):
    if spec.kind == "torus":
        pts = np.mod(points, 1.0)
        pts[pts >= 1.0] = 0.0
        return cKDTree(pts, boxsize=1.0), pts
    return cKDTree(points), points


def _chord_to_geodesic(spec, d):
    if spec.kind == "torus":
        return d
    return 2.0 * np.arcsin(np.clip(d / 2.0, 0.0, 1.0))


def point_separation(spec, points):
    """Minimum pairwise geodesic distance (inf for a single point)."""
    if len(points) < 2:
        return math.inf
    tree, pts = _ambient_tree(spec, points)
    d, _ = tree.query(pts, k=2)
    return float(np.min(_chord_to_geodesic(spec, d[:, 1])))


def covering_radius(spec, points, probes):
    """Max over probes of the distance to the nearest point."""
    tree, _ = _ambient_tree(spec, points)
    if spec.kind == "torus":
        probes = np.mod(probes, 1.0)
        probes[probes >= 1.0] = 0.0
    d, _ = tree.query(probes, k=1)
    return float(np.max(_chord_to_geodesic(spec, d)))


def equispaced_torus_layer(d, n, oversampling=1.0):
    """Tensor grid with ceil(oversampling * (2m + 1)) nodes per axis, m the max frequency."""
    spec = ManifoldSpec.torus(d)
    if n <= 0:
        raise DomainError("degree must be positive")
    if oversampling < 1:
        raise DomainError("oversampling must be >= 1")
    m = torus_max_frequency(n)
    per_axis = int(math.ceil(oversampling * (2 * m + 1) - 1e-9))
    total = per_axis**d
    if total > MAX_LAYER_POINTS:
        raise ResourceError(f"equispaced layer needs {total} points, cap is {MAX_LAYER_POINTS}")
    axis = np.arange(per_axis) / per_axis
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=1)
    w = np.full(total, 1.0 / total)
    cert = Certificate(2.0, 1.0, 1.0, 1.0, "analytic")
    return MZLayer(spec, float(n), pts, w, (cert,))


def _default_pool(spec, eps):
    d = spec.dim
    if spec.kind == "torus":
        return int(math.ceil(max(10.0 / eps**d, (4.0 / eps) ** d)))
    # Fibonacci spacing ~ sqrt(4 pi / P) <= eps / 4
    return int(math.ceil(max(10.0 / eps**2, 64.0 * 4.0 * math.pi / eps**2)))


def _candidate_pool(spec, size, rng):
    if spec.kind == "torus":
        d = spec.dim
        g = int(math.ceil(size ** (1.0 / d) - 1e-9))
        axis = np.arange(g) + 0.5
        mesh = np.meshgrid(*([axis] * d), indexing="ij")
        base = np.stack([m.ravel() for m in mesh], axis=1)
        jitter = 0.5 * (rng.random(base.shape) - 0.5)
        pts = np.mod((base + jitter) / g, 1.0)
        pts[pts >= 1.0] = 0.0
        return pts
    i = np.arange(size) + 0.5
    z = 1.0 - 2.0 * i / size
    phi = math.pi * (3.0 - math.sqrt(5.0)) * i
    s = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    pts = np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)
    spacing = math.sqrt(4.0 * math.pi / size)
    pts = pts + 0.25 * spacing * rng.standard_normal(pts.shape)
    return pts / np.linalg.norm(pts, axis=1)[:, None]


def maximal_separated_set(spec, eps, candidate_pool=None, seed=0):
    """Greedy maximal eps-separated subset of a shuffled, jittered candidate pool.

    Torus pools are jittered grids, sphere pools jittered Fibonacci lattices.
    The returned set is eps-separated and covers the pool within eps.
    """
    if eps <= 0:
        raise DomainError("eps must be positive")
    rng = np.random.default_rng(seed)
    if eps >= spec.diameter:
        pts = _candidate_pool(spec, 1, rng)
        return PointSet(spec, pts, math.inf, spec.diameter, 1)
    if candidate_pool is None:
        candidate_pool = _default_pool(spec, eps)
    candidate_pool = int(candidate_pool)
    if candidate_pool < 10.0 / eps**spec.dim:
        raise ConstructionError(
            f"candidate pool of {candidate_pool} is too sparse to certify covering radius <= {eps}; "
            f"need at least {math.ceil(10.0 / eps**spec.dim)}"
        )
    if candidate_pool > MAX_CANDIDATE_POOL:
        raise ResourceError(f"candidate pool {candidate_pool} exceeds cap {MAX_CANDIDATE_POOL}")
    cands = _candidate_pool(spec, candidate_pool, rng)
    cands = cands[rng.permutation(len(cands))]
    if spec.kind == "torus":
        keep = kernels.greedy_separated_torus(cands, eps)
    else:
        keep = kernels.greedy_separated_sphere(cands, eps)
    pts = cands[keep]
    if len(pts) > MAX_LAYER_POINTS:
        raise ResourceError(f"separated set has {len(pts)} points, cap is {MAX_LAYER_POINTS}")
    sep = point_separation(spec, pts)
    cov = covering_radius(spec, pts, cands)
    if sep < eps * (1 - 1e-12) or cov > eps * (1 + 1e-12):
        raise ConstructionError(f"greedy selection broke its guarantees: separation {sep}, covering {cov}, eps {eps}")
    return PointSet(spec, pts, sep, cov, len(cands))


def voronoi_weights(spec, points, mc_samples=None, seed=0, chunk=250_000):
    """Monte Carlo Voronoi cell masses: the share of uniform draws nearest to each point.

    Ties go to the lower index. Raises if any cell receives no sample.
    """
    pts = points.points if isinstance(points, PointSet) else np.asarray(points, dtype=np.float64)
    npts = len(pts)
    if npts == 1:
        return np.ones(1)
    if mc_samples is None:
        mc_samples = 100 * npts
    if mc_samples < 100 * npts:
        raise DomainError(f"mc_samples must be >= 100 * #points = {100 * npts}")
    tree, _ = _ambient_tree(spec, pts)
    rng = np.random.default_rng(seed)
    counts = np.zeros(npts, dtype=np.int64)
    left = int(mc_samples)
    while left > 0:
        m = min(chunk, left)
        left -= m
        sample = uniform_points(spec, m, rng)
        dist, idx = tree.query(sample, k=2)
        owner = idx[:, 0]
        tie = (dist[:, 1] == dist[:, 0]) & (idx[:, 1] < idx[:, 0])
        owner = np.where(tie, idx[:, 1], owner)
        counts += np.bincount(owner, minlength=npts)
    if np.any(counts == 0):
        empty = int(np.sum(counts == 0))
        raise ConstructionError(f"{empty} Voronoi cells received no sample; increase mc_samples")
    return counts / float(mc_samples)


def mz_layer(points, weights, n):
    """Package a point set and weights as a layer for degree n."""
    if isinstance(points, PointSet):
        spec, pts = points.spec, points.points
    else:
        raise DomainError("mz_layer expects a PointSet")
    w = np.asarray(weights, dtype=np.float64)
    return MZLayer(spec, float(n), pts, w)


def separated_layer(spec, n, delta=None, seed=0, candidate_pool=None, mc_per_point=100):
    """Maximal (delta/n)-separated set with Voronoi weights, uncertified."""
    delta = DEFAULT_DELTA[spec.kind] if delta is None else delta
    ps = maximal_separated_set(spec, delta / n, candidate_pool, seed)
    w = voronoi_weights(spec, ps, mc_per_point * len(ps), seed + 1)
    return mz_layer(ps, w, n)


def frame_bounds(layer, basis=None, p=2.0, method="exact2", trials=200, quad=None, seed=0, sup_grid_factor=8):
    """Frame bounds (A, B, kappa) of a layer at its degree.

    ``exact2`` uses the extreme eigenvalues of the discrete Gram matrix; it is
    valid for p = 2 only. ``randomized`` samples Gaussian coefficient vectors
    and reports min/max of the discrete-to-continuous ratio, an empirical
    inner estimate of the true bounds.
    """
    p = float(p)
    n = layer.degree
    if basis is None:
        basis = build_basis(layer.spec, n)
    Phi = basis.evaluate(layer.points, n, points_normalized=True)
    if method == "exact2":
        if p != 2.0:
            raise DomainError("method exact2 requires p = 2")
        G = Phi.T @ (layer.weights[:, None] * Phi)
        ev = np.linalg.eigvalsh(0.5 * (G + G.T))
        A, B = float(ev[0]), float(ev[-1])
        if A < 1e-12 * B:
            raise LayerError(f"not an MZ layer at this degree (min Gram eigenvalue {A:.3e}, max {B:.3e})")
        return Certificate(2.0, A, B, B / A, "exact2")
    if method != "randomized":
        raise DomainError(f"unknown certification method {method!r}")
    if p < 1:
        raise DomainError("p must be >= 1")
    if quad is None:
        quad = reference_quadrature(layer.spec, n)
    ref_pts = quad.refined_grid(sup_grid_factor) if math.isinf(p) else quad.nodes
    Psi = basis.evaluate(ref_pts, n, points_normalized=True)
    ratios = np.empty(trials)
    for t in range(trials):
        c = np.random.default_rng([seed, t]).standard_normal(Phi.shape[1])
        disc = np.abs(Phi @ c)
        cont = np.abs(Psi @ c)
        if math.isinf(p):
            ratios[t] = disc.max() / cont.max()
        else:
            ratios[t] = np.dot(layer.weights, disc**p) / np.dot(quad.weights, cont**p)
    A, B = float(ratios.min()), float(ratios.max())
    if not A > 0:
        raise LayerError("not an MZ layer at this degree (a sampled polynomial vanished on the layer)")
    kappa = 1.0 / A if math.isinf(p) else B / A
    return Certificate(p, A, B, kappa, "randomized", int(trials), int(seed))


def regularity_constant(layer, probe_centers):
    """max over probes y of (weight mass in B(y, 1/n)) / mu(B(y, 1/n))."""
    spec = layer.spec
    probes = spec.normalize_points(probe_centers)
    if len(probes) == 0:
        raise DomainError("need at least one probe center")
    radius = 1.0 / layer.degree
    vol = spec.ball_measure(radius)
    best = 0.0
    for start in range(0, len(probes), 256):
        block = probes[start : start + 256]
        dist = geodesic_distance(spec, block[:, None, :], layer.points[None, :, :])
        mass = (dist < radius) @ layer.weights
        best = max(best, float(mass.max()) / vol)
    return best


def layer_to_json(layer):
    return {
        "manifold": layer.spec.name,
        "n": float(layer.degree),
        "points": layer.points.tolist(),
        "weights": layer.weights.tolist(),
        "certificate": [c.to_json() for c in layer.certificates],
    }


def layer_from_json(obj):
    spec = ManifoldSpec.parse(obj["manifold"])
    pts = spec.normalize_points(np.asarray(obj["points"], dtype=np.float64))
    certs = tuple(Certificate.from_json(c) for c in _as_list(obj.get("certificate", [])))
    return MZLayer(spec, float(obj["n"]), pts, np.asarray(obj["weights"], dtype=np.float64), certs)


def _as_list(x):
    return [x] if isinstance(x, dict) else list(x)


def save_layer(layer, path, extra=None):
    obj = layer_to_json(layer)
    if extra:
        obj.update(extra)
    with open(path, "w") as fh:
        json.dump(obj, fh)


def load_layer(path):
    with open(path) as fh:
        return layer_from_json(json.load(fh))
