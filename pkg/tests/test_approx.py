import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from mzapprox import (
    CoeffFunction,
    ConvergenceError,
    DomainError,
    LayerError,
    ManifoldSpec,
    MZLayer,
    SolverOptions,
    apply_ls_projector,
    build_basis,
    discrete_gram,
    discrete_orthonormal_basis,
    equispaced_torus_layer,
    filter_value,
    filtered_approx,
    filtered_approx_from_samples,
    kernel_l1_norm,
    least_lp_fit,
    reference_quadrature,
    reproducing_kernel,
    separated_layer,
    sphere_degree,
    torus_degree,
)
from mzapprox.approx import discrete_objective, filter_kernel, filter_kernel_from_basis, ls_projection_matrix
from mzapprox.manifold import uniform_points

P_VALUES = [1.0, 1.5, 2.0, 4.0, math.inf]


@pytest.fixture(scope="module")
def torus_layer():
    return separated_layer(ManifoldSpec.torus(1), torus_degree(6), 0.5, seed=11)


@pytest.fixture(scope="module")
def sphere_layer():
    return separated_layer(ManifoldSpec.sphere2(), sphere_degree(4), 0.6, seed=12)


def test_p2_fit_matches_weighted_lstsq(sphere_layer, rng):
    f = rng.standard_normal(len(sphere_layer))
    fit = least_lp_fit(sphere_layer, f, 2.0)
    basis = build_basis(sphere_layer.spec, sphere_layer.degree)
    Phi = basis.evaluate(sphere_layer.points, sphere_layer.degree)
    ref = oracles.weighted_lstsq(Phi, f, sphere_layer.weights)
    assert np.max(np.abs(fit.coeffs - ref)) < 1e-10


@pytest.mark.parametrize("p", P_VALUES)
def test_reproduction(p, torus_layer, rng):
    basis = build_basis(torus_layer.spec, torus_layer.degree)
    c = rng.standard_normal(basis.dim(torus_layer.degree))
    Q = CoeffFunction(basis, torus_layer.degree, c)
    fit = least_lp_fit(torus_layer, Q(torus_layer.points), p)
    tol = 1e-8 if p == 2.0 else 1e-6
    probes = rng.random((50, 1))
    assert np.max(np.abs(fit(probes) - Q(probes))) <= tol


@pytest.mark.parametrize("p", P_VALUES)
def test_minimality_against_perturbations(p, sphere_layer, rng):
    f = rng.standard_normal(len(sphere_layer))
    fit = least_lp_fit(sphere_layer, f, p)
    basis = build_basis(sphere_layer.spec, sphere_layer.degree)
    Phi = basis.evaluate(sphere_layer.points, sphere_layer.degree)
    obj = discrete_objective(f - Phi @ fit.coeffs, sphere_layer.weights, p)
    assert obj == pytest.approx(fit.objective, rel=1e-12)
    for scale in (1e-4, 1e-2, 1.0):
        for _ in range(10):
            c = fit.coeffs + scale * rng.standard_normal(fit.coeffs.shape)
            other = discrete_objective(f - Phi @ c, sphere_layer.weights, p)
            assert obj <= other * (1 + 1e-9)


@given(st.integers(0, 10_000), st.sampled_from([1.0, 1.5, math.inf]))
def test_small_instances_match_brute_force(seed, p):
    spec = ManifoldSpec.torus(1)
    n = torus_degree(1)
    r = np.random.default_rng(seed)
    N = int(r.integers(3, 7))
    x = r.random((N, 1))
    tau = r.random(N) + 0.1
    tau /= tau.sum()
    f = r.standard_normal(N)
    basis = build_basis(spec, n)
    Phi = basis.evaluate(x, n)
    layer = MZLayer(spec, n, x, tau)
    got = least_lp_fit(layer, f, p).objective
    if p == 1.0:
        ref = oracles.l1_vertex_oracle(Phi, f, tau)
    elif math.isinf(p):
        ref = oracles.minimax_dual_oracle(Phi, f)
    else:
        ref = oracles.lp_direct_oracle(Phi, f, tau, p)
    assert abs(got - ref) <= 1e-6


@given(st.integers(0, 10_000), st.sampled_from(P_VALUES))
def test_shift_covariance_on_equispaced_grid(seed, p):
    # shifting the data by one grid step shifts the fit by the same step
    layer = equispaced_torus_layer(1, torus_degree(4), oversampling=2)
    N = len(layer)
    f = np.random.default_rng(seed).standard_normal(N)
    a = least_lp_fit(layer, f, p)
    b = least_lp_fit(layer, np.roll(f, 1), p)
    probes = np.random.default_rng(seed + 1).random((20, 1))
    if p in (1.0, math.inf):
        # minimizers need not be unique; only the objective is shift invariant
        assert b.objective == pytest.approx(a.objective, rel=1e-7)
    else:
        assert np.max(np.abs(b(probes + 1.0 / N) - a(probes))) <= 1e-7 * max(1.0, np.max(np.abs(f)))


@given(st.floats(0.1, 10.0), st.sampled_from(P_VALUES))
def test_fit_is_homogeneous(c, p):
    layer = equispaced_torus_layer(1, torus_degree(3), oversampling=2)
    f = np.random.default_rng(1).standard_normal(len(layer))
    a = least_lp_fit(layer, f, p).objective
    b = least_lp_fit(layer, c * f, p).objective
    assert b == pytest.approx(c * a, rel=1e-7)


def test_irls_trace_decreases(torus_layer, rng):
    f = rng.standard_normal(len(torus_layer))
    trace = []
    fit = least_lp_fit(torus_layer, f, 1.5, trace=trace)
    assert trace and fit.iterations > 0
    eps = [t[2] for t in trace]
    assert all(b <= a for a, b in zip(eps, eps[1:]))


def test_lawson_reports_gap(torus_layer, rng):
    f = rng.standard_normal(len(torus_layer))
    trace = []
    least_lp_fit(torus_layer, f, math.inf, trace=trace)
    assert trace[-1][2] <= 1e-9 * trace[-1][1] + 1e-15


def test_lawson_budget_exhaustion_raises(torus_layer, rng):
    f = rng.standard_normal(len(torus_layer))
    with pytest.raises(ConvergenceError):
        least_lp_fit(torus_layer, f, math.inf, SolverOptions(lawson_max_iterations=2))


def test_bad_inputs(torus_layer):
    with pytest.raises(DomainError):
        least_lp_fit(torus_layer, np.zeros(len(torus_layer)), 0.5)
    with pytest.raises(DomainError):
        least_lp_fit(torus_layer, np.zeros(3), 2.0)
    with pytest.raises(DomainError):
        least_lp_fit(torus_layer, np.zeros(len(torus_layer)), 1.5, SolverOptions(method="qr"))
    with pytest.raises(DomainError):
        SolverOptions(irls_epsilon_schedule=(1e-3, 1e-2))
    with pytest.raises(DomainError):
        SolverOptions(max_iterations=0)


def test_discrete_orthonormal_basis(sphere_layer):
    G = discrete_gram(sphere_layer)
    T = discrete_orthonormal_basis(sphere_layer)
    assert np.max(np.abs(T @ G @ T.T - np.eye(len(G)))) < 1e-10


def test_singular_gram_is_reported():
    spec = ManifoldSpec.torus(1)
    layer = MZLayer(spec, torus_degree(2), np.array([[0.0], [0.0], [0.5], [0.5], [0.5]]), np.ones(5) / 5)
    with pytest.raises(LayerError):
        discrete_orthonormal_basis(layer)


def test_reproducing_kernel_reproduces(sphere_layer, rng):
    basis = build_basis(sphere_layer.spec, sphere_layer.degree)
    c = rng.standard_normal(basis.dim(sphere_layer.degree))
    Q = CoeffFunction(basis, sphere_layer.degree, c)
    probes = uniform_points(sphere_layer.spec, 30, rng)
    vals = apply_ls_projector(sphere_layer, Q(sphere_layer.points), probes)
    assert np.max(np.abs(vals - Q(probes))) < 1e-9
    K = reproducing_kernel(sphere_layer)
    D = K(probes, probes)
    assert np.allclose(D, D.T)


def test_projection_matrix_matches_fit(torus_layer, rng):
    f = rng.standard_normal(len(torus_layer))
    C = ls_projection_matrix(torus_layer)
    assert np.max(np.abs(C @ f - least_lp_fit(torus_layer, f, 2.0).coeffs)) < 1e-10


def test_filter_shape():
    t = np.linspace(0, 3, 601)
    h = filter_value(t)
    assert np.all(h[t <= 1] == 1.0) and np.all(h[t >= 2] == 0.0)
    assert np.all(np.diff(h) <= 1e-15)
    assert filter_value(1.5) == pytest.approx(0.5)
    with pytest.raises(DomainError):
        filter_value(-0.1)


@pytest.mark.parametrize("spec,n", [(ManifoldSpec.torus(1), torus_degree(5)), (ManifoldSpec.sphere2(), sphere_degree(5)),
                                    (ManifoldSpec.torus(2), torus_degree(3))], ids=["t1", "s2", "t2"])
def test_filtered_operator_identity_on_polynomials(spec, n, rng):
    basis = build_basis(spec, 2 * n)
    c = rng.standard_normal(basis.dim(n))
    Q = CoeffFunction(basis, n, c)
    V = filtered_approx(Q, n)
    x = uniform_points(spec, 40, rng)
    assert np.max(np.abs(V(x) - Q(x))) < 1e-12
    quad = reference_quadrature(spec, 3 * n)
    W = filtered_approx_from_samples(Q, n, quad)
    assert np.max(np.abs(W(x) - Q(x))) < 1e-11


@pytest.mark.parametrize("spec,n", [(ManifoldSpec.torus(1), torus_degree(3)), (ManifoldSpec.sphere2(), sphere_degree(4)),
                                    (ManifoldSpec.torus(2), torus_degree(2))], ids=["t1", "s2", "t2"])
def test_zonal_kernel_matches_basis_sum(spec, n, rng):
    x = uniform_points(spec, 5, rng)
    y = uniform_points(spec, 7, rng)
    basis = build_basis(spec, 2 * n)
    assert np.max(np.abs(filter_kernel(spec, n, x, y) - filter_kernel_from_basis(basis, n, x, y))) < 1e-10


def test_kernel_l1_norm_bounded_across_doublings():
    spec = ManifoldSpec.torus(1)
    vals = []
    for m in (8, 16, 32, 64):
        n = torus_degree(m)
        quad = reference_quadrature(spec, 16 * n)
        vals.append(float(np.max(kernel_l1_norm(n, np.array([[0.0], [0.37]]), quad))))
    assert max(vals) / min(vals) < 1.5


@given(st.integers(0, 10_000), st.sampled_from(P_VALUES))
def test_adding_a_polynomial_leaves_objective_unchanged(seed, p):
    layer = separated_layer(ManifoldSpec.sphere2(), sphere_degree(3), 0.6, seed=13)
    basis = build_basis(layer.spec, layer.degree)
    r = np.random.default_rng(seed)
    f = np.sin(3 * layer.points[:, 0]) + r.standard_normal(len(layer))
    Q = CoeffFunction(basis, layer.degree, r.standard_normal(basis.dim(layer.degree)))
    a = least_lp_fit(layer, f, p, basis=basis)
    b = least_lp_fit(layer, f + Q(layer.points), p, basis=basis)
    assert b.objective == pytest.approx(a.objective, rel=1e-7)
