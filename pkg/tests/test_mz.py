import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mzapprox import (
    ConstructionError,
    DomainError,
    LayerError,
    ManifoldSpec,
    MZLayer,
    build_basis,
    equispaced_torus_layer,
    frame_bounds,
    maximal_separated_set,
    regularity_constant,
    separated_layer,
    sphere_degree,
    torus_degree,
    voronoi_weights,
)
from mzapprox.manifold import uniform_points
from mzapprox.mz import covering_radius, layer_from_json, layer_to_json, load_layer, point_separation, save_layer


@pytest.mark.parametrize("d,m", [(1, 5), (1, 40), (2, 4), (3, 2)])
def test_equispaced_layer_is_tight(d, m):
    layer = equispaced_torus_layer(d, torus_degree(m))
    cert = frame_bounds(layer)
    assert cert.A == pytest.approx(1.0, abs=1e-10)
    assert cert.B == pytest.approx(1.0, abs=1e-10)
    assert len(layer) == (2 * m + 1) ** d


def test_gram_oracle_for_equispaced_layer():
    # an independent evaluation of the discrete Gram matrix by complex exponentials
    m = 6
    layer = equispaced_torus_layer(1, torus_degree(m))
    x = layer.points[:, 0]
    k = np.arange(-m, m + 1)
    E = np.exp(2j * np.pi * np.outer(x, k))
    G = (E.conj().T * layer.weights) @ E
    assert np.max(np.abs(G - np.eye(len(k)))) < 1e-12


@given(st.floats(0.01, 100.0))
def test_weight_scaling_scales_bounds(c):
    layer = separated_layer(ManifoldSpec.torus(1), torus_degree(6), 0.5, seed=1)
    a = frame_bounds(layer)
    b = frame_bounds(layer.scaled(c))
    assert b.A == pytest.approx(c * a.A, rel=1e-9)
    assert b.B == pytest.approx(c * a.B, rel=1e-9)
    assert b.kappa == pytest.approx(a.kappa, rel=1e-9)


def test_randomized_bounds_inside_exact_bounds():
    layer = separated_layer(ManifoldSpec.sphere2(), sphere_degree(6), 0.6, seed=2)
    exact = frame_bounds(layer)
    rnd = frame_bounds(layer, p=2.0, method="randomized", trials=100)
    assert exact.A <= rnd.A * (1 + 1e-9)
    assert rnd.B <= exact.B * (1 + 1e-9)
    assert rnd.kappa <= exact.kappa * (1 + 1e-9)


def test_randomized_bounds_monotone_in_trials():
    layer = separated_layer(ManifoldSpec.torus(1), torus_degree(10), 0.5, seed=3)
    few = frame_bounds(layer, p=1.0, method="randomized", trials=20, seed=4)
    many = frame_bounds(layer, p=1.0, method="randomized", trials=200, seed=4)
    # the first 20 draws are shared, so more trials only widen the range
    assert many.A <= few.A and many.B >= few.B


def test_exact2_rejects_other_p():
    layer = equispaced_torus_layer(1, torus_degree(3))
    with pytest.raises(DomainError):
        frame_bounds(layer, p=1.0, method="exact2")


@pytest.mark.parametrize("spec,eps", [(ManifoldSpec.torus(1), 0.03), (ManifoldSpec.torus(2), 0.1),
                                      (ManifoldSpec.sphere2(), 0.15)], ids=["t1", "t2", "s2"])
def test_separated_set_guarantees(spec, eps):
    ps = maximal_separated_set(spec, eps, seed=5)
    assert point_separation(spec, ps.points) >= eps * (1 - 1e-12)
    probes = uniform_points(spec, 20_000, np.random.default_rng(6))
    # covering is certified on the candidate pool; fresh probes may sit slightly farther
    assert covering_radius(spec, ps.points, probes) <= 1.5 * eps
    assert ps.separation >= eps * (1 - 1e-12) and ps.covering_radius <= eps * (1 + 1e-12)


def test_sparse_pool_is_rejected():
    with pytest.raises(ConstructionError):
        maximal_separated_set(ManifoldSpec.torus(1), 0.01, candidate_pool=50)


def test_voronoi_weights_sum_to_one_and_match_cells():
    spec = ManifoldSpec.torus(1)
    pts = np.array([[0.0], [0.25], [0.5]])
    w = voronoi_weights(spec, pts, mc_samples=400_000, seed=1)
    assert w.sum() == pytest.approx(1.0)
    # cell boundaries are the midpoints 0.125, 0.375 and 0.75
    assert np.allclose(w, [0.375, 0.25, 0.375], atol=4e-3)


def test_voronoi_requires_enough_samples():
    with pytest.raises(DomainError):
        voronoi_weights(ManifoldSpec.torus(1), np.array([[0.0], [0.5]]), mc_samples=10)


def test_layer_invariants():
    spec = ManifoldSpec.torus(1)
    pts = np.linspace(0, 1, 9, endpoint=False).reshape(-1, 1)
    with pytest.raises(LayerError, match="positive-weights"):
        MZLayer(spec, torus_degree(2), pts, np.r_[-1.0, np.ones(8)])
    with pytest.raises(LayerError):
        MZLayer(spec, torus_degree(2), pts, np.ones(8))
    with pytest.raises(LayerError):
        MZLayer(spec, torus_degree(6), pts, np.ones(9) / 9)


def test_degenerate_layer_is_not_mz():
    spec = ManifoldSpec.torus(1)
    # 5 points but all on two positions: Gram matrix of degree 2 is singular
    pts = np.array([[0.0], [0.0], [0.5], [0.5], [0.5]])
    layer = MZLayer(spec, torus_degree(2), pts, np.ones(5) / 5)
    with pytest.raises(LayerError):
        frame_bounds(layer)


def test_json_round_trip(tmp_path):
    layer = separated_layer(ManifoldSpec.sphere2(), sphere_degree(3), 0.6, seed=0)
    layer = layer.certified(frame_bounds(layer))
    obj = layer_to_json(layer)
    assert set(obj) >= {"manifold", "n", "points", "weights", "certificate"}
    back = layer_from_json(json.loads(json.dumps(obj)))
    assert np.array_equal(back.points, layer.points)
    assert np.array_equal(back.weights, layer.weights)
    assert back.certificate(2.0) == layer.certificate(2.0)
    path = tmp_path / "layer.json"
    save_layer(layer, path)
    again = load_layer(path)
    assert again.degree == layer.degree and again.spec == layer.spec


def test_certificate_json_handles_infinity():
    layer = equispaced_torus_layer(1, torus_degree(4))
    cert = frame_bounds(layer, p=math.inf, method="randomized", trials=30)
    back = layer_from_json(json.loads(json.dumps(layer_to_json(layer.certified(cert)))))
    assert back.certificate(math.inf).A == cert.A


def test_regularity_of_equispaced_layer():
    layer = equispaced_torus_layer(1, torus_degree(20), oversampling=8)
    probes = uniform_points(layer.spec, 2000, np.random.default_rng(0))
    reg = regularity_constant(layer, probes)
    assert 0.8 < reg < 1.25


def test_separated_layer_sizes_scale_like_dimension():
    spec = ManifoldSpec.sphere2()
    counts = []
    for ell in (4, 8):
        n = sphere_degree(ell)
        layer = separated_layer(spec, n, 0.6, seed=0)
        counts.append(len(layer) / build_basis(spec, n).dim(n))
    assert 0.5 < counts[1] / counts[0] < 2.0
