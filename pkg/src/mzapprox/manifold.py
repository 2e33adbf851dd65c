"""Manifold backends: the flat torus T^d (d = 1, 2, 3) and the sphere S^2.

Points on the torus are coordinate vectors in [0, 1)^d; points on the sphere
are unit vectors in R^3. All measures are normalized to total mass one, and the
eigenbasis is real and orthonormal for that measure.

The degree parameter ``n`` is always a cutoff on the square root of the
Laplace-Beltrami eigenvalue: P_n = span{phi_k : lambda_k <= n}.
"""
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ResourceError
from .kernels import real_sph_harm

__all__ = [
    "ManifoldSpec",
    "EigenBasis",
    "ReferenceQuadrature",
    "MAX_BASIS_DIM",
    "MAX_QUAD_NODES",
    "build_basis",
    "basis_matrix",
    "geodesic_distance",
    "reference_quadrature",
    "lq_norm",
    "torus_degree",
    "torus_max_frequency",
    "sphere_degree",
    "sphere_max_degree",
    "dim_closed_form",
    "uniform_points",
]

MAX_BASIS_DIM = 20_000
MAX_QUAD_NODES = 4_000_000

# relative slack when comparing eigenvalue square roots to a cutoff
_CUT_RTOL = 1e-12


@dataclass(frozen=True)
class ManifoldSpec:
    kind: str
    dim: int

    def __post_init__(self):
        if self.kind == "torus":
            if self.dim not in (1, 2, 3):
                raise DomainError(f"torus dimension must be 1, 2 or 3, got {self.dim}")
        elif self.kind == "sphere":
            if self.dim != 2:
                raise DomainError("only the 2-sphere is supported")
        else:
            raise DomainError(f"unknown manifold kind {self.kind!r}")

    @classmethod
    def torus(cls, d=1):
        return cls("torus", int(d))

    @classmethod
    def sphere2(cls):
        return cls("sphere", 2)

    @classmethod
    def parse(cls, name):
        """Parse ``torus1``, ``torus2``, ``torus3`` or ``sphere2``."""
        name = str(name).strip().lower().replace("_", "").replace("-", "")
        if name.startswith("torus"):
            rest = name[5:] or "1"
            if rest.startswith("("):
                rest = rest.strip("()")
            return cls.torus(int(rest))
        if name in ("sphere", "sphere2", "s2"):
            return cls.sphere2()
        raise DomainError(f"unknown manifold {name!r}")

    @property
    def name(self):
        return f"torus{self.dim}" if self.kind == "torus" else "sphere2"

    @property
    def ambient_dim(self):
        return self.dim if self.kind == "torus" else 3

    @property
    def diameter(self):
        return 0.5 * math.sqrt(self.dim) if self.kind == "torus" else math.pi

    def normalize_points(self, points):
        pts = np.asarray(points, dtype=np.float64)
        if self.kind == "torus" and self.dim == 1 and pts.ndim <= 1:
            pts = pts.reshape(-1, 1)
        pts = np.array(np.atleast_2d(pts), dtype=np.float64)
        if pts.shape[1] != self.ambient_dim:
            raise DomainError(f"{self.name} points need {self.ambient_dim} coordinates, got shape {pts.shape}")
        if self.kind == "torus":
            pts = np.mod(pts, 1.0)
            pts[pts >= 1.0] = 0.0
        else:
            norms = np.linalg.norm(pts, axis=1)
            if np.any(np.abs(norms - 1.0) > 1e-12):
                raise DomainError("sphere points must be unit vectors (|x| within 1e-12 of 1)")
        return pts

    def ball_measure(self, radius):
        """Normalized measure of a geodesic ball."""
        radius = float(radius)
        if radius <= 0:
            return 0.0
        if self.kind == "sphere":
            return 0.5 * (1.0 - math.cos(min(radius, math.pi)))
        d = self.dim
        if d == 1:
            return min(2.0 * radius, 1.0)
        unit = math.pi if d == 2 else 4.0 * math.pi / 3.0
        # exact while the ball does not wrap onto itself
        return min(unit * radius**d, 1.0)


def torus_degree(m):
    """Eigenvalue cutoff n = 2*pi*m for maximal frequency m."""
    return 2.0 * math.pi * m


def torus_max_frequency(n):
    return int(math.floor(n / (2.0 * math.pi) * (1.0 + _CUT_RTOL) + 1e-12))


def sphere_degree(ell):
    """Eigenvalue cutoff n = sqrt(l(l+1)) for maximal spherical degree l."""
    return math.sqrt(ell * (ell + 1.0))


def sphere_max_degree(n):
    ell = int(math.floor(math.sqrt(max(n, 0.0) ** 2 + 0.25) - 0.5)) + 1
    while ell > 0 and ell * (ell + 1.0) > n * n * (1.0 + 2 * _CUT_RTOL) + 1e-12:
        ell -= 1
    return ell


def dim_closed_form(spec, n):
    """dim P_n by direct counting formulas (independent of build_basis)."""
    if spec.kind == "sphere":
        return (sphere_max_degree(n) + 1) ** 2
    m = n / (2.0 * math.pi)
    r2 = m * m * (1.0 + 2 * _CUT_RTOL) + 1e-12
    mf = torus_max_frequency(n)
    if spec.dim == 1:
        return 2 * mf + 1
    if spec.dim == 2:
        return sum(2 * math.isqrt(int(math.floor(r2 - k * k))) + 1 for k in range(-mf, mf + 1))
    total = 0
    for k1 in range(-mf, mf + 1):
        for k2 in range(-mf, mf + 1):
            rest = r2 - k1 * k1 - k2 * k2
            if rest >= 0:
                total += 2 * math.isqrt(int(math.floor(rest))) + 1
    return total


@dataclass(frozen=True, eq=False)
class EigenBasis:
    """Laplace-Beltrami eigenpairs with lambda_k <= lambda_max.

    ``indices`` holds frequency vectors on the torus (a positive-leading vector
    labels sqrt(2) cos(2 pi k.x), its negative labels sqrt(2) sin(2 pi |k|.x))
    and (l, m) pairs on the sphere.
    """

    spec: ManifoldSpec
    lambda_max: float
    lambdas: np.ndarray
    indices: np.ndarray

    def __len__(self):
        return len(self.lambdas)

    def dim(self, n):
        """dim P_n, i.e. the length of the prefix with lambda_k <= n."""
        if n > self.lambda_max * (1.0 + _CUT_RTOL) + 1e-12:
            raise DomainError(f"degree {n} exceeds basis cutoff {self.lambda_max}")
        return int(np.searchsorted(self.lambdas, n * (1.0 + _CUT_RTOL) + 1e-12, side="right"))

    def evaluate(self, points, n=None, points_normalized=False):
        """Matrix of phi_j(x_i) for the columns with lambda_j <= n."""
        n = self.lambda_max if n is None else n
        ncol = self.dim(n)
        pts = points if points_normalized else self.spec.normalize_points(points)
        if self.spec.kind == "sphere":
            L = int(self.indices[ncol - 1, 0]) if ncol else 0
            return real_sph_harm(pts, L)[:, :ncol]
        return _torus_matrix(pts, self.indices[:ncol])

    def label(self, j):
        idx = tuple(int(v) for v in self.indices[j])
        if self.spec.kind == "sphere":
            return f"Y(l={idx[0]},m={idx[1]})"
        if not any(idx):
            return "1"
        kind = "cos" if _positive_leading(idx) else "sin"
        k = idx if kind == "cos" else tuple(-v for v in idx)
        return f"sqrt2*{kind}(2pi*{list(k)}.x)"


def _positive_leading(k):
    for v in k:
        if v != 0:
            return v > 0
    return False


def _torus_matrix(pts, kvecs):
    kvecs = np.asarray(kvecs, dtype=np.float64)
    out = np.empty((pts.shape[0], kvecs.shape[0]))
    if kvecs.shape[0] == 0:
        return out
    # sign of the leading nonzero entry decides cos (+) vs sin (-)
    lead = np.zeros(kvecs.shape[0])
    for c in range(kvecs.shape[1] - 1, -1, -1):
        lead = np.where(kvecs[:, c] != 0, np.sign(kvecs[:, c]), lead)
    phase = 2.0 * np.pi * (pts @ (kvecs * lead[:, None]).T)
    sq2 = math.sqrt(2.0)
    out[:, lead > 0] = sq2 * np.cos(phase[:, lead > 0])
    out[:, lead < 0] = sq2 * np.sin(phase[:, lead < 0])
    out[:, lead == 0] = 1.0
    return out


def build_basis(spec, lambda_max, max_dim=MAX_BASIS_DIM):
    """Enumerate all eigenpairs with lambda_k <= lambda_max in canonical order."""
    if lambda_max < 0:
        raise DomainError("lambda_max must be nonnegative")
    lambda_max = float(lambda_max)
    expected = dim_closed_form(spec, lambda_max)
    if expected > max_dim:
        raise ResourceError(f"basis dimension {expected} exceeds cap {max_dim}")
    if spec.kind == "sphere":
        L = sphere_max_degree(lambda_max)
        idx = np.array([(l, m) for l in range(L + 1) for m in range(-l, l + 1)], dtype=np.int64).reshape(-1, 2)
        lam = np.sqrt(idx[:, 0] * (idx[:, 0] + 1.0))
        return EigenBasis(spec, lambda_max, lam, idx)
    mf = torus_max_frequency(lambda_max)
    r2 = (lambda_max / (2.0 * math.pi)) ** 2 * (1.0 + 2 * _CUT_RTOL) + 1e-12
    vecs = [k for k in itertools.product(range(-mf, mf + 1), repeat=spec.dim) if sum(v * v for v in k) <= r2]
    vecs.sort(key=lambda k: (sum(v * v for v in k), k))
    idx = np.array(vecs, dtype=np.int64).reshape(-1, spec.dim)
    lam = 2.0 * np.pi * np.sqrt(np.sum(idx * idx, axis=1).astype(np.float64))
    return EigenBasis(spec, lambda_max, lam, idx)


def basis_matrix(basis, n, points):
    """Evaluation table Phi[i, j] = phi_j(x_i) over the columns of P_n."""
    return basis.evaluate(points, n)


def geodesic_distance(spec, x, y):
    """Geodesic distance; broadcasts over leading axes of point arrays."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if spec.kind == "torus":
        if spec.dim == 1 and x.ndim <= 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        if spec.dim == 1 and y.ndim <= 1 and (y.ndim == 0 or y.shape[-1] != 1):
            y = y[..., None]
        diff = x - y
        diff = diff - np.floor(diff + 0.5)
        return np.sqrt(np.sum(diff * diff, axis=-1))
    dot = np.sum(x * y, axis=-1)
    return np.arccos(np.clip(dot, -1.0, 1.0))


@dataclass(frozen=True, eq=False)
class ReferenceQuadrature:
    """Tensor-product rule; exact for phi_j * phi_k with lambda_j, lambda_k <= exactness."""

    spec: ManifoldSpec
    nodes: np.ndarray
    weights: np.ndarray
    exactness_degree: float
    grid_shape: tuple = field(default=())

    def __len__(self):
        return len(self.weights)

    def integrate(self, values):
        return float(np.dot(self.weights, values))

    def refined_grid(self, factor):
        """A denser grid, ``factor`` times the node density along each axis."""
        factor = max(int(factor), 1)
        if self.spec.kind == "torus":
            return _torus_grid(self.spec.dim, self.grid_shape[0] * factor)[0]
        nlat, nlon = self.grid_shape
        return _sphere_grid(nlat * factor, nlon * factor)[0]


def _torus_grid(d, per_axis):
    axis = np.arange(per_axis) / per_axis
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=1)
    return nodes, np.full(nodes.shape[0], 1.0 / nodes.shape[0])


def _sphere_grid(nlat, nlon):
    z, wz = np.polynomial.legendre.leggauss(nlat)
    phi = 2.0 * np.pi * np.arange(nlon) / nlon
    zz, pp = np.meshgrid(z, phi, indexing="ij")
    s = np.sqrt(np.clip(1.0 - zz * zz, 0.0, None))
    nodes = np.stack([(s * np.cos(pp)).ravel(), (s * np.sin(pp)).ravel(), zz.ravel()], axis=1)
    nodes /= np.linalg.norm(nodes, axis=1)[:, None]
    weights = np.outer(wz / 2.0, np.full(nlon, 1.0 / nlon)).ravel()
    return nodes, weights


def reference_quadrature(spec, exactness_degree, max_nodes=MAX_QUAD_NODES, verify=True):
    """Ground-truth integration rule.

    Torus: equispaced tensor grid with ceil(E/pi) + 1 nodes per axis.
    Sphere: Gauss-Legendre in cos(theta) times equispaced longitudes, sized so
    that products of harmonics of degree <= L integrate exactly.
    """
    if exactness_degree <= 0:
        raise DomainError("exactness_degree must be positive")
    E = float(exactness_degree)
    if spec.kind == "torus":
        per_axis = int(math.ceil(E / math.pi - 1e-9)) + 1
        total = per_axis**spec.dim
        if total > max_nodes:
            raise ResourceError(f"reference grid needs {total} nodes, cap is {max_nodes}")
        nodes, weights = _torus_grid(spec.dim, per_axis)
        shape = (per_axis,)
    else:
        L = sphere_max_degree(E)
        nlat, nlon = L + 1, 2 * L + 1
        if nlat * nlon > max_nodes:
            raise ResourceError(f"reference grid needs {nlat * nlon} nodes, cap is {max_nodes}")
        nodes, weights = _sphere_grid(nlat, nlon)
        shape = (nlat, nlon)
    quad = ReferenceQuadrature(spec, nodes, weights, E, shape)
    if verify:
        _verify_reference(quad)
    return quad


def _verify_reference(quad):
    if abs(quad.weights.sum() - 1.0) > 1e-12 or np.any(quad.weights <= 0):
        raise AssertionError("reference weights must be positive and sum to 1")
    spec = quad.spec
    # spot-check exactness on the highest modes up to the cutoff
    if spec.kind == "torus":
        m = torus_max_frequency(quad.exactness_degree)
        top = 2 * m
        k = np.zeros((1, spec.dim), dtype=np.float64)
        k[0, 0] = top
        vals = np.cos(2 * np.pi * quad.nodes @ k.T).ravel() if top else np.ones(len(quad))
        target = 1.0 if top == 0 else 0.0
        if abs(quad.integrate(vals) - target) > 1e-12:
            raise AssertionError("reference torus grid failed exactness check")
    else:
        L = sphere_max_degree(quad.exactness_degree)
        top = 2 * L
        if top > 0:
            z = quad.nodes[:, 2]
            pl = np.polynomial.legendre.legval(z, np.eye(top + 1)[top])
            if abs(quad.integrate(pl)) > 1e-12:
                raise AssertionError("reference sphere grid failed exactness check")


def lq_norm(f, q, quad, sup_grid_factor=8):
    """L_q norm of a point evaluator.

    q < inf uses the quadrature nodes; q = inf takes the maximum over a grid
    ``sup_grid_factor`` times denser than the nodes.
    """
    q = float(q)
    if not q >= 1.0:
        raise DomainError(f"L_q norm needs q >= 1, got {q}")
    if math.isinf(q):
        grid = quad.refined_grid(sup_grid_factor)
        return float(np.max(np.abs(_evaluate(f, grid))))
    vals = np.abs(_evaluate(f, quad.nodes))
    if q == 2.0:
        return float(math.sqrt(np.dot(quad.weights, vals * vals)))
    if q == 1.0:
        return float(np.dot(quad.weights, vals))
    return float(np.dot(quad.weights, vals**q) ** (1.0 / q))


def _evaluate(f, points):
    return np.asarray(f(points), dtype=np.float64).reshape(-1)


def uniform_points(spec, count, rng):
    """``count`` i.i.d. points drawn from the normalized measure."""
    if spec.kind == "torus":
        return rng.random((count, spec.dim))
    g = rng.standard_normal((count, 3))
    return g / np.linalg.norm(g, axis=1)[:, None]
