"""Finite eigenfunction expansions and their JSON form."""
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .manifold import EigenBasis, ManifoldSpec, build_basis

__all__ = ["CoeffFunction", "PolyCoeffs", "bessel_scale", "coeff_to_json", "coeff_from_json", "save_coeffs", "load_coeffs"]


@dataclass(eq=False)
class CoeffFunction:
    """f = sum_k coeffs[k] * phi_k over the basis prefix with lambda_k <= cutoff.

    Fourier coefficients are exact by lookup; ``meta`` records provenance such
    as truncation cutoffs.
    """

    basis: EigenBasis
    cutoff: float
    coeffs: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.float64)
        expected = self.basis.dim(self.cutoff)
        if self.coeffs.shape != (expected,):
            raise DomainError(f"expected {expected} coefficients for cutoff {self.cutoff}, got {self.coeffs.shape}")
        if not np.all(np.isfinite(self.coeffs)):
            raise DomainError("coefficients must be finite")

    @property
    def spec(self):
        return self.basis.spec

    @property
    def lambdas(self):
        return self.basis.lambdas[: len(self.coeffs)]

    def __call__(self, points):
        return self.basis.evaluate(points, self.cutoff) @ self.coeffs

    def fourier(self, k):
        """Exact coefficient of phi_k (zero beyond the cutoff)."""
        return float(self.coeffs[k]) if k < len(self.coeffs) else 0.0

    def padded(self, length):
        out = np.zeros(length)
        m = min(length, len(self.coeffs))
        out[:m] = self.coeffs[:m]
        return out

    def with_coeffs(self, coeffs, cutoff=None, **meta):
        merged = dict(self.meta)
        merged.update(meta)
        return CoeffFunction(self.basis, self.cutoff if cutoff is None else cutoff, coeffs, merged)

    def __add__(self, other):
        cut = max(self.cutoff, other.cutoff)
        basis = self.basis if self.basis.lambda_max >= cut else other.basis
        n = basis.dim(cut)
        return CoeffFunction(basis, cut, self.padded(n) + other.padded(n))

    def __sub__(self, other):
        return self + other.scaled(-1.0)

    def scaled(self, c):
        return CoeffFunction(self.basis, self.cutoff, c * self.coeffs, dict(self.meta))

    def l2_norm(self):
        return float(np.linalg.norm(self.coeffs))


@dataclass(eq=False)
class PolyCoeffs(CoeffFunction):
    """A member of P_n produced by a fit; ``objective`` is the attained residual norm."""

    objective: float = math.nan
    p: float = 2.0
    iterations: int = 0

    @property
    def degree(self):
        return self.cutoff


def bessel_scale(f, r):
    """Apply (I - Laplacian)^{r/2}: coefficient k times (1 + lambda_k^2)^{r/2}."""
    factors = (1.0 + f.lambdas**2) ** (0.5 * r)
    return CoeffFunction(f.basis, f.cutoff, f.coeffs * factors, dict(f.meta))


def coeff_to_json(f):
    return {
        "manifold": f.spec.name,
        "cutoff": float(f.cutoff),
        "indices": f.basis.indices[: len(f.coeffs)].tolist(),
        "coefficients": [float(c) for c in f.coeffs],
    }


def coeff_from_json(obj, basis=None):
    spec = ManifoldSpec.parse(obj["manifold"])
    cutoff = float(obj["cutoff"])
    if basis is None:
        basis = build_basis(spec, cutoff)
    n = basis.dim(cutoff)
    idx = np.asarray(obj["indices"], dtype=np.int64).reshape(n, -1)
    if not np.array_equal(idx, basis.indices[:n]):
        raise DomainError("coefficient file index order does not match the canonical basis")
    return CoeffFunction(basis, cutoff, np.asarray(obj["coefficients"], dtype=np.float64))


def save_coeffs(f, path):
    with open(path, "w") as fh:
        json.dump(coeff_to_json(f), fh, indent=1)


def load_coeffs(path, basis=None):
    with open(path) as fh:
        return coeff_from_json(json.load(fh), basis)
