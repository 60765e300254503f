"""Uncertainty quantification for acoustic scattering from random surfaces."""

from .analytic import mie_neumann_trace, mie_scattered, mie_scattered_gradient
from .bem import (
    BoundaryDiscretization,
    NeumannTrace,
    WaveSetup,
    assemble_cfie,
    assemble_single_layer,
    eval_scattered,
    eval_scattered_gradient,
    fundamental_solution,
    rhs_incident,
    solve_density,
    solve_scattering,
)
from .chebyshev import ChebyshevGrid, bary_eval_1d, chebyshev_grid
from .geomio import load_surface, save_surface
from .interface import (
    ArtificialInterface,
    CauchyData,
    EnclosureError,
    InterfaceMoments,
    build_interface,
    cauchy_from_trace,
    moments_from_samples,
    propagate_correlation,
    propagate_mean,
    rank_one_moments,
    represent_exterior,
)
from .mlmc import (
    CampaignResult,
    LevelStats,
    MLMCPlan,
    MomentAccumulator,
    error_vs_reference,
    gamma_factors,
    mlmc_run,
    optimal_allocation,
    pilot_estimate,
    top_anchored_plan,
)
from .nurbs import PatchMap, patch_eval
from .pipeline import ScatteringSampler, fibonacci_sphere
from .randfield import (
    CovarianceModel,
    DeformationSample,
    KLBasis,
    LandmarkCovariance,
    MaternKernel,
    NotPositiveSemidefiniteError,
    PivotedCholeskyResult,
    covariance_entry,
    default_covariance_model,
    deformed_surface,
    draw_parameters,
    kl_from_cholesky,
    kl_sample,
    load_kl_basis,
    matern_eval,
    pivoted_cholesky,
    rng_stream,
    save_kl_basis,
    singular_value_decay,
)
from .surfaces import (
    InterpolatedSurface,
    LandmarkSet,
    MultiPatchSurface,
    build_landmarks,
    builtin_surface,
    patch_quadrature,
    reference_surface,
    surface_area,
    surface_from_global,
    surface_from_nodal,
    surface_jacobian_normal,
)

__version__ = "0.1.0"
