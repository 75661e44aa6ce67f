"""Monochromatic random waves on flat tori and the round sphere.

Mode enumeration, coefficient laws, window kernels, local-mass quadratic
forms, Chernoff tail bounds and a reproducible experiment runner.
"""
from .bessel import normalized_bessel
from .concentration import (
    ChernoffBound,
    ChernoffParams,
    CovarianceTerms,
    TailReport,
    chernoff_bound,
    chernoff_two_sided,
    covariance_empirical,
    covariance_exact,
    empirical_tail,
    mgf_lower,
    mgf_upper,
    theorem_bound,
)
from .ensemble import (
    CoefficientLaw,
    RandomField,
    evaluate_field,
    expected_local_mass,
    normalization_variance,
    sample_field,
)
from .errors import (
    ConfigError,
    DomainError,
    EmptyWindow,
    EtaExceedsT,
    MemoryGuard,
    MonowaveError,
    RadiusTooLarge,
)
from .kernel import KernelPrediction, TwoPointKernel, kernel_envelope, kernel_exact, kernel_predicted
from .local_mass import (
    LocalMassMatrix,
    SpectrumSummary,
    local_mass,
    matrix_spectrum,
    trace_power_via_kernel,
    variance_envelope,
    variance_exact,
)
from .manifolds import (
    WINDOW_CONVENTION,
    BallQuadrature,
    Circle,
    EigenMode,
    FlatTorus,
    Quadrature,
    SpectralWindow,
    Sphere2,
    ball_quadrature,
    ball_volume,
    covering_grid,
    covering_radius,
    design_matrix,
    enumerate_modes,
    evaluate_mode,
    geodesic_distance,
    manifold_quadrature,
    mode_count,
    symmetric_difference_volume,
)

__version__ = "0.1.0"
