"""Sobolev and Besov norms of finite expansions, best approximation, test functions."""
import math
from dataclasses import dataclass

import numpy as np

from .approx import least_lp_fit
from .coeffs import CoeffFunction, bessel_scale
from .errors import DomainError, LayerError
from .manifold import build_basis, lq_norm, reference_quadrature
from .mz import MZLayer

__all__ = [
    "SmoothnessSpec",
    "MIN_BESOV_TAU",
    "DECAY_SLACK",
    "sobolev_norm",
    "best_approx_error",
    "besov_norm",
    "random_smooth_function",
    "peaked_function",
]

MIN_BESOV_TAU = 0.1
# random draws decay like (1 + lambda^2)^{-(r + d/2 + DECAY_SLACK)/2}
DECAY_SLACK = 0.01


@dataclass(frozen=True)
class SmoothnessSpec:
    """Smoothness class H_p^r or B_{p,tau}^r on a d-dimensional manifold.

    With ``point_evaluation`` set (the default) the class must embed into
    continuous functions, which needs r > d / p.
    """

    space: str
    p: float
    r: float
    tau: float = math.inf
    dim: int = 1
    point_evaluation: bool = True

    def __post_init__(self):
        if self.space not in ("sobolev", "besov"):
            raise DomainError(f"unknown smoothness space {self.space!r}")
        if not self.p >= 1.0:
            raise DomainError(f"p must be in [1, inf], got {self.p}")
        if not self.r > 0:
            raise DomainError(f"r must be positive, got {self.r}")
        if self.space == "besov" and not self.tau >= MIN_BESOV_TAU:
            raise DomainError(f"Besov tau below {MIN_BESOV_TAU} is not supported (got {self.tau})")
        if self.point_evaluation and not self.r > self.dim / self.p:
            raise DomainError(
                f"r = {self.r} <= d/p = {self.dim / self.p}: point evaluation is not continuous on this class"
            )

    @property
    def embedding_margin(self):
        return self.r - self.dim / self.p


def _quad_for(f, quad):
    if quad is None:
        return reference_quadrature(f.spec, max(2.0 * f.cutoff, 1.0))
    return quad


def sobolev_norm(f, p, r, quad=None):
    """||(I - Laplacian)^{r/2} f||_{L_p}; p = 2 is evaluated by Parseval."""
    g = bessel_scale(f, r)
    if float(p) == 2.0 and quad is None:
        return g.l2_norm()
    return lq_norm(g, p, _quad_for(f, quad))


def _tail_norm(f, n):
    if n >= f.cutoff:
        return 0.0
    return float(np.linalg.norm(f.coeffs[f.basis.dim(n):]))


def best_approx_error(f, n, p=2.0, fine_layer=None, opts=None, quad=None, details=False):
    """E_n(f)_p, the L_p distance from f to P_n.

    p = 2 is the exact coefficient tail. Otherwise f is fitted by least l_p on
    the nodes of ``fine_layer`` (which must carry a p-certificate and resolve
    the cutoff of f) and the continuous error of that fit is measured with the
    reference quadrature. With ``details`` the layer's frame bounds and the
    implied comparability bracket are returned as well.
    """
    p = float(p)
    if p == 2.0:
        err = _tail_norm(f, n)
        return (err, {"method": "tail"}) if details else err
    if fine_layer is None:
        raise DomainError("best_approx_error for p != 2 needs a fine MZ layer")
    cert = fine_layer.certificate(p)
    if cert is None:
        raise LayerError(f"fine layer carries no certificate for p = {p}")
    if fine_layer.degree < f.cutoff:
        raise DomainError(f"fine layer degree {fine_layer.degree:.6g} below the cutoff {f.cutoff:.6g} of f")
    if n >= f.cutoff:
        return (0.0, {"method": "exact"}) if details else 0.0
    layer_n = MZLayer(fine_layer.spec, float(n), fine_layer.points, fine_layer.weights)
    basis = f.basis if f.basis.lambda_max >= n else build_basis(f.spec, n)
    fit = least_lp_fit(layer_n, f(fine_layer.points), p, opts, basis=basis)
    m = len(f.coeffs)
    resid = CoeffFunction(f.basis, f.cutoff, f.coeffs - fit.padded(m))
    err = lq_norm(resid, p, _quad_for(f, quad))
    if not details:
        return err
    if math.isinf(p):
        bracket = (err, err / cert.A)
    else:
        bracket = (err * cert.B ** (-1.0 / p), err * cert.A ** (-1.0 / p))
    return err, {"method": "fit", "A": cert.A, "B": cert.B, "bracket": bracket}


def besov_norm(f, p, tau, r, jmax, fine_layer=None, opts=None, quad=None):
    """||f||_p + (sum_{j <= jmax} 2^{j r tau} E_{2^j}(f)_p^tau)^{1/tau} (sup for tau = inf)."""
    if not tau >= MIN_BESOV_TAU:
        raise DomainError(f"Besov tau below {MIN_BESOV_TAU} is not supported (got {tau})")
    if 2.0**jmax < f.cutoff:
        raise DomainError(f"jmax = {jmax} leaves degrees up to {f.cutoff:.6g} unresolved; need 2^jmax >= cutoff")
    p = float(p)
    q = _quad_for(f, quad) if (p != 2.0 or quad is not None) else None
    base = f.l2_norm() if q is None else lq_norm(f, p, q)
    terms = np.array([
        2.0 ** (j * r) * best_approx_error(f, 2.0**j, p, fine_layer, opts, q) for j in range(jmax + 1)
    ])
    if math.isinf(tau):
        return base + float(terms.max())
    return base + float(np.sum(terms**tau) ** (1.0 / tau))


def random_smooth_function(spec, r, p, cutoff, seed=0, quad=None, basis=None):
    """Seeded random expansion with unit H_p^r norm.

    Standard normal coefficients are shaped by (1 + lambda^2)^{-(r + d/2 + 0.01)/2}
    and rescaled. Coefficient k is always the k-th draw of the seeded stream,
    so raising the cutoff leaves the low modes unchanged up to the rescale.
    """
    d = spec.dim
    if not r > d / p:
        raise DomainError(f"r = {r} <= d/p = {d / p}")
    if basis is None or basis.lambda_max < cutoff:
        basis = build_basis(spec, cutoff)
    m = basis.dim(cutoff)
    g = np.random.default_rng(seed).standard_normal(m)
    f = bessel_scale(CoeffFunction(basis, cutoff, g), -(r + 0.5 * d + DECAY_SLACK))
    norm = sobolev_norm(f, p, r, None if float(p) == 2.0 else quad)
    return f.with_coeffs(f.coeffs / norm, kind="random", seed=int(seed), r=float(r), p=float(p))


def peaked_function(spec, r, cutoff, center, basis=None):
    """Unit H_2^r expansion concentrated at ``center``.

    Coefficient k is phi_k(center) (1 + lambda_k^2)^{-(r + d/2 + 0.01)/2}, so
    all modes add up at the center. Its pointwise tail beyond degree n decays
    only like n^{-r + d/2}, the slowest rate allowed in H_2^r.
    """
    if basis is None or basis.lambda_max < cutoff:
        basis = build_basis(spec, cutoff)
    center = spec.normalize_points(center)[:1]
    phi = basis.evaluate(center, cutoff)[0]
    f = bessel_scale(CoeffFunction(basis, cutoff, phi), -(r + 0.5 * spec.dim + DECAY_SLACK))
    return f.with_coeffs(f.coeffs / sobolev_norm(f, 2.0, r), kind="peaked", r=float(r))
