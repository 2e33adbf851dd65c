"""Least-squares quadrature rules induced by an L_2 MZ layer."""
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .approx import _SINGULAR_RTOL, least_lp_fit
from .coeffs import CoeffFunction
from .errors import DomainError, LayerError
from .manifold import ManifoldSpec, build_basis, lq_norm
from .mz import Certificate, MZLayer

__all__ = [
    "QuadratureRule",
    "ls_quadrature",
    "integrate",
    "check_quad_bound",
    "rule_to_json",
    "rule_from_json",
    "save_rule",
    "load_rule",
]


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """I_n f = sum_k w_k f(x_k) on the nodes of ``layer``; weights may be negative."""

    layer: MZLayer
    weights: np.ndarray
    degree: float
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.weights)

    @property
    def spec(self):
        return self.layer.spec

    @property
    def points(self):
        return self.layer.points

    @property
    def negative_fraction(self):
        return float(np.mean(self.weights < 0))

    def integrate(self, samples):
        return integrate(self, samples)


def _gram_route(Phi, tau):
    # w = diag(tau) Phi G^{-1} e_0
    G = Phi.T @ (tau[:, None] * Phi)
    G = 0.5 * (G + G.T)
    ev = np.linalg.eigvalsh(G)
    if ev[0] < _SINGULAR_RTOL * ev[-1]:
        raise LayerError(f"discrete Gram matrix is singular (eigenvalues {ev[0]:.3e} .. {ev[-1]:.3e})")
    e0 = np.zeros(G.shape[0])
    e0[0] = 1.0
    y = sla.cho_solve(sla.cho_factor(G), e0)
    return tau * (Phi @ y)


def _fit_route(Phi, tau):
    # first row of the p = 2 fit operator: c_0 = e_0^T R^{-1} Q^T diag(sqrt tau) f
    s = np.sqrt(tau)
    Q, R = np.linalg.qr(s[:, None] * Phi)
    e0 = np.zeros(R.shape[0])
    e0[0] = 1.0
    z = sla.solve_triangular(R, e0, trans="T")
    return s * (Q @ z)


def ls_quadrature(layer, basis=None, route="gram"):
    """Weights w_k = tau_k * integral of D_n(x, x_k), computed in coefficient space.

    Since only phi_0 has nonzero mean, the integral picks the constant
    coefficient of the least-squares fit. ``route="gram"`` solves G y = e_0,
    ``route="fit"`` reads the first row of the QR solution operator. Both are
    always computed; their max difference is stored as ``meta["route_gap"]``.
    """
    if basis is None:
        basis = build_basis(layer.spec, layer.degree)
    Phi = basis.evaluate(layer.points, layer.degree, points_normalized=True)
    tau = layer.weights
    wg = _gram_route(Phi, tau)
    wf = _fit_route(Phi, tau)
    if route not in ("gram", "fit"):
        raise DomainError(f"unknown quadrature route {route!r}")
    w = wg if route == "gram" else wf
    meta = {"route": route, "route_gap": float(np.max(np.abs(wg - wf)))}
    return QuadratureRule(layer, w, layer.degree, meta)


def integrate(rule, samples):
    f = np.asarray(samples, dtype=np.float64).reshape(-1)
    if f.shape[0] != len(rule.weights):
        raise DomainError(f"{f.shape[0]} samples for a rule with {len(rule.weights)} nodes")
    return float(np.dot(rule.weights, f))


def check_quad_bound(f, layer, rule, quad=None, basis=None):
    """Both sides of |int f - I_n f| <= ||f - L_n f||_2.

    For a ``CoeffFunction`` both sides are exact in coefficient space; for a
    plain point evaluator they use the reference quadrature ``quad``.
    """
    if basis is None:
        basis = build_basis(layer.spec, layer.degree)
    samples = np.asarray(f(layer.points), dtype=np.float64).reshape(-1)
    fit = least_lp_fit(layer, samples, 2.0, basis=basis)
    approx = rule.integrate(samples)
    if isinstance(f, CoeffFunction):
        m = max(len(f.coeffs), len(fit.coeffs))
        resid = f.padded(m) - fit.padded(m)
        return abs(f.fourier(0) - approx), float(np.linalg.norm(resid))
    if quad is None:
        raise DomainError("a reference quadrature is required for point-evaluator input")
    exact = quad.integrate(np.asarray(f(quad.nodes), dtype=np.float64).reshape(-1))

    def residual(x):
        return np.asarray(f(x), dtype=np.float64).reshape(-1) - fit(x)

    return abs(exact - approx), lq_norm(residual, 2.0, quad)


def rule_to_json(rule):
    layer = rule.layer
    return {
        "manifold": layer.spec.name,
        "n": float(rule.degree),
        "points": layer.points.tolist(),
        "tau": layer.weights.tolist(),
        "w": rule.weights.tolist(),
        "certificate": [c.to_json() for c in layer.certificates],
    }


def rule_from_json(obj):
    spec = ManifoldSpec.parse(obj["manifold"])
    pts = spec.normalize_points(np.asarray(obj["points"], dtype=np.float64))
    certs = obj.get("certificate", [])
    certs = [certs] if isinstance(certs, dict) else certs
    layer = MZLayer(spec, float(obj["n"]), pts, np.asarray(obj["tau"], dtype=np.float64),
                    tuple(Certificate.from_json(c) for c in certs))
    w = np.asarray(obj["w"], dtype=np.float64)
    if w.shape != (len(layer),):
        raise DomainError("rule file: 'w' must have one entry per point")
    return QuadratureRule(layer, w, layer.degree)


def save_rule(rule, path):
    with open(path, "w") as fh:
        json.dump(rule_to_json(rule), fh)


def load_rule(path):
    with open(path) as fh:
        return rule_from_json(json.load(fh))

