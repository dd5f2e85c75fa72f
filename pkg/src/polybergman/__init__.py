"""Weighted Bergman kernels of polynomial spaces, equilibrium potentials and their random-matrix shadows."""

from .bergman import (
    Basis,
    BergmanModel,
    ConditioningError,
    bergman_function,
    build_model,
    dimension_residual,
    extremal_ratio,
    kernel,
    log_bergman_function,
    log_kernel_potential,
    model_for,
    monomial_basis,
    monomial_coefficients,
    weighted_kernel,
)
from .equilibrium import (
    EnvelopeResult,
    RadialGrid,
    coincidence_set,
    decay_check,
    domination_check,
    equilibrium_density,
    expansion_probe,
    growth_exponent,
    l1_error,
    log_kernel_contact,
    offdiag_mass,
    phi_e_point,
    radial_envelope,
    weight_envelope,
)
from .polytope import (
    Polytope,
    lattice_basis,
    mass_fraction,
    polytope_equilibrium,
    polytope_model,
    support_weight,
    toric_coincidence,
    validate_growth_polytope,
)
from .quadrature import QuadRule, default_rule, integrate, polar_rule, truncation_radius
from .stochastic import (
    SampleBatch,
    SamplingError,
    bergman_radial_cdf,
    empirical_discrepancy,
    sample_dpp,
    sample_zeros,
    zero_intensity,
    zeros_radial_cdf,
)
from .weights import Weight, complex_hessian_fd, ma_density, make_builtin, validate_growth

__version__ = "0.1.0"
