import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from mzapprox import (
    DomainError,
    ManifoldSpec,
    build_basis,
    geodesic_distance,
    lq_norm,
    reference_quadrature,
    sphere_degree,
    torus_degree,
)
from mzapprox.manifold import dim_closed_form, sphere_max_degree, torus_max_frequency, uniform_points

SPECS = [ManifoldSpec.torus(1), ManifoldSpec.torus(2), ManifoldSpec.torus(3), ManifoldSpec.sphere2()]
SMALL_N = {"torus1": torus_degree(12), "torus2": torus_degree(5), "torus3": torus_degree(3), "sphere2": sphere_degree(10)}


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.name)
def test_basis_orthonormal_under_reference_rule(spec):
    n = SMALL_N[spec.name]
    basis = build_basis(spec, n)
    quad = reference_quadrature(spec, 2.0 * n)
    Phi = basis.evaluate(quad.nodes, n, points_normalized=True)
    G = Phi.T @ (quad.weights[:, None] * Phi)
    assert np.max(np.abs(G - np.eye(G.shape[0]))) < 1e-12


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.name)
def test_dimension_matches_closed_form_and_enumeration(spec):
    for k in range(0, 6):
        if spec.kind == "torus":
            n = torus_degree(k)
            want = oracles.torus_lattice_count(spec.dim, k)
        else:
            n = sphere_degree(k)
            want = (k + 1) ** 2
        assert build_basis(spec, n).dim(n) == want
        assert dim_closed_form(spec, n) == want


def test_sphere_harmonics_match_scipy(rng):
    x = rng.standard_normal((40, 3))
    x /= np.linalg.norm(x, axis=1)[:, None]
    L = 9
    basis = build_basis(ManifoldSpec.sphere2(), sphere_degree(L))
    ours = basis.evaluate(x, sphere_degree(L))
    assert np.max(np.abs(ours - oracles.real_harmonics(x, L))) < 1e-11


def test_torus_basis_eigenvalues_and_values():
    spec = ManifoldSpec.torus(2)
    n = torus_degree(3)
    basis = build_basis(spec, n)
    lam = basis.lambdas[: basis.dim(n)]
    k = basis.indices[: basis.dim(n)]
    assert np.allclose(lam, 2 * np.pi * np.linalg.norm(k, axis=1))
    assert np.all(np.diff(lam) >= -1e-12)
    # first column is the constant 1
    pts = np.random.default_rng(0).random((7, 2))
    assert np.allclose(basis.evaluate(pts, n)[:, 0], 1.0)


def test_degree_helpers_round_trip():
    for m in range(0, 40):
        assert torus_max_frequency(torus_degree(m)) == m
    for ell in range(0, 40):
        assert sphere_max_degree(sphere_degree(ell)) == ell


@pytest.mark.parametrize("bad", ["klein", "torus4", "sphere3", ""])
def test_parse_rejects_unknown_manifolds(bad):
    with pytest.raises(DomainError):
        ManifoldSpec.parse(bad)


def test_sphere_points_must_be_unit():
    with pytest.raises(DomainError):
        ManifoldSpec.sphere2().normalize_points([[1.0, 1.0, 0.0]])


@given(st.lists(st.floats(-3, 3), min_size=6, max_size=6))
def test_torus_distance_is_a_metric(v):
    spec = ManifoldSpec.torus(2)
    x, y, z = (np.array(v[i : i + 2]) for i in (0, 2, 4))
    dxy = geodesic_distance(spec, x, y)
    assert dxy >= 0 and dxy <= spec.diameter + 1e-12
    assert dxy == pytest.approx(geodesic_distance(spec, y, x), abs=1e-14)
    assert dxy <= geodesic_distance(spec, x, z) + geodesic_distance(spec, z, y) + 1e-12


@given(st.integers(0, 2**31 - 1))
def test_sphere_distance_triangle(seed):
    spec = ManifoldSpec.sphere2()
    pts = uniform_points(spec, 3, np.random.default_rng(seed))
    x, y, z = pts
    assert geodesic_distance(spec, x, y) <= geodesic_distance(spec, x, z) + geodesic_distance(spec, z, y) + 1e-12
    assert 0 <= geodesic_distance(spec, x, y) <= math.pi


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.name)
def test_ball_measure_limits(spec):
    assert spec.ball_measure(0.0) == 0.0
    assert spec.ball_measure(10.0) == pytest.approx(1.0)
    r = np.linspace(0.01, 0.2, 10)
    vals = [spec.ball_measure(t) for t in r]
    assert np.all(np.diff(vals) > 0)


def test_sphere_ball_measure_against_monte_carlo():
    spec = ManifoldSpec.sphere2()
    pts = uniform_points(spec, 400_000, np.random.default_rng(3))
    frac = np.mean(np.arccos(np.clip(pts[:, 2], -1, 1)) < 0.4)
    assert frac == pytest.approx(spec.ball_measure(0.4), abs=4e-3)


@given(st.integers(1, 30), st.integers(0, 10_000))
def test_nikolskii_ratio_bounded(m, seed):
    # ||Q||_inf <= C dim(P_n)^{1/2} ||Q||_2 with C = 1 by Cauchy-Schwarz on an orthonormal basis
    spec = ManifoldSpec.torus(1)
    n = torus_degree(m)
    basis = build_basis(spec, n)
    c = np.random.default_rng(seed).standard_normal(basis.dim(n))
    quad = reference_quadrature(spec, 2 * n)

    def Q(x):
        return basis.evaluate(x, n) @ c

    sup = lq_norm(Q, math.inf, quad)
    assert sup <= math.sqrt(basis.dim(n)) * np.linalg.norm(c) * (1 + 1e-12)
    assert lq_norm(Q, 2.0, quad) == pytest.approx(np.linalg.norm(c), rel=1e-12)


def test_lq_norm_rejects_small_q():
    quad = reference_quadrature(ManifoldSpec.torus(1), 10.0)
    with pytest.raises(DomainError):
        lq_norm(lambda x: np.ones(len(x)), 0.5, quad)


def test_lq_norm_of_constants():
    for spec in SPECS:
        quad = reference_quadrature(spec, 8.0)
        for q in (1.0, 1.5, 2.0, math.inf):
            assert lq_norm(lambda x: np.full(len(x), 2.0), q, quad) == pytest.approx(2.0, rel=1e-12)


def test_reference_quadrature_weights():
    for spec in SPECS:
        quad = reference_quadrature(spec, 15.0)
        assert np.all(quad.weights > 0)
        assert quad.weights.sum() == pytest.approx(1.0, abs=1e-13)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.name)
def test_weyl_growth(spec):
    # dim P_n / n^d stays inside a fixed band
    ratios = []
    for k in range(1, 5):
        n = 4.0 * 2**k * (1 if spec.kind == "sphere" else 2 * np.pi)
        if spec.kind == "torus" and spec.dim == 3 and k > 2:
            break
        ratios.append(dim_closed_form(spec, n) / n**spec.dim)
    assert max(ratios) / min(ratios) < 2.0
