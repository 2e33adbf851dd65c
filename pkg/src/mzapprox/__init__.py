"""Marcinkiewicz-Zygmund sampling, least l_p fitting and quadrature on the torus and the 2-sphere."""
__version__ = "0.1.0"

from .errors import ConstructionError, ConvergenceError, DomainError, LayerError, MZError, ResourceError
from .manifold import (
    EigenBasis,
    ManifoldSpec,
    ReferenceQuadrature,
    basis_matrix,
    build_basis,
    geodesic_distance,
    lq_norm,
    reference_quadrature,
    sphere_degree,
    torus_degree,
)
from .coeffs import CoeffFunction, PolyCoeffs, bessel_scale
from .mz import (
    Certificate,
    MZLayer,
    PointSet,
    equispaced_torus_layer,
    frame_bounds,
    maximal_separated_set,
    mz_layer,
    regularity_constant,
    separated_layer,
    voronoi_weights,
)
from .approx import (
    SolverOptions,
    apply_ls_projector,
    discrete_gram,
    discrete_orthonormal_basis,
    filter_value,
    filtered_approx,
    filtered_approx_from_samples,
    kernel_l1_norm,
    least_lp_fit,
    reproducing_kernel,
)
from .quadrature import QuadratureRule, check_quad_bound, integrate, ls_quadrature
from .spaces import SmoothnessSpec, besov_norm, best_approx_error, random_smooth_function, sobolev_norm
from .experiments import ExperimentConfig, RateReport, fit_slope, run_rates

__all__ = [
    "__version__",
    "EigenBasis",
    "ManifoldSpec",
    "ReferenceQuadrature",
    "basis_matrix",
    "build_basis",
    "geodesic_distance",
    "lq_norm",
    "reference_quadrature",
    "sphere_degree",
    "torus_degree",
    "Certificate",
    "MZLayer",
    "PointSet",
    "equispaced_torus_layer",
    "frame_bounds",
    "maximal_separated_set",
    "mz_layer",
    "regularity_constant",
    "separated_layer",
    "voronoi_weights",
    "SolverOptions",
    "apply_ls_projector",
    "discrete_gram",
    "discrete_orthonormal_basis",
    "filter_value",
    "filtered_approx",
    "filtered_approx_from_samples",
    "kernel_l1_norm",
    "least_lp_fit",
    "reproducing_kernel",
    "ConstructionError",
    "ConvergenceError",
    "DomainError",
    "LayerError",
    "MZError",
    "ResourceError",
    "CoeffFunction",
    "PolyCoeffs",
    "bessel_scale",
    "QuadratureRule",
    "check_quad_bound",
    "integrate",
    "ls_quadrature",
    "SmoothnessSpec",
    "besov_norm",
    "best_approx_error",
    "random_smooth_function",
    "sobolev_norm",
    "ExperimentConfig",
    "RateReport",
    "fit_slope",
    "run_rates",
]
