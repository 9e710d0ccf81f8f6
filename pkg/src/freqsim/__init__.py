"""freqsim: simulate and cross-verify the culled frequency process of a
two-type branching population with competition and immigration."""

from .dual import (
    DAGGER,
    DualRates,
    DualityReport,
    PositivityError,
    PositivityViolation,
    build_rates,
    dual_ensemble,
    dual_moment,
    duality_check,
    generator_identity_residual,
    simulate_dual,
    theta_k,
)
from .measures import JumpMeasure, mean_component
from .model import (
    ModelParams,
    PolynomialMalthusian,
    generator_on_monomial,
    term_bundle,
    validate_params,
)
from .ode import (
    EquilibriumReport,
    LimitParams,
    ModelFamily,
    ScalingFamilyError,
    find_equilibria,
    integrate,
    large_population_experiment,
    limit_params_from_model,
    limit_rhs,
    linear_case_closed_form,
    logistic_case_closed_form,
    phase_diagram,
    rhs_coefficients,
)
from .simulate import (
    PathConfig,
    StopBand,
    Trajectory,
    cbi_ensemble,
    coupled_ensemble,
    coupled_pair,
    culled_frequency_ensemble,
    culling_chain_ensemble,
    moment_estimate,
    sample_moment,
    simulate_cbi,
    simulate_culled_frequency,
    simulate_culling_chain,
)

__version__ = "0.1.0"

__all__ = [
    "DAGGER",
    "DualRates",
    "DualityReport",
    "EquilibriumReport",
    "JumpMeasure",
    "LimitParams",
    "ModelFamily",
    "ModelParams",
    "PathConfig",
    "PolynomialMalthusian",
    "PositivityError",
    "PositivityViolation",
    "ScalingFamilyError",
    "StopBand",
    "Trajectory",
    "build_rates",
    "cbi_ensemble",
    "coupled_ensemble",
    "coupled_pair",
    "culled_frequency_ensemble",
    "culling_chain_ensemble",
    "dual_ensemble",
    "dual_moment",
    "duality_check",
    "find_equilibria",
    "generator_identity_residual",
    "generator_on_monomial",
    "integrate",
    "large_population_experiment",
    "limit_params_from_model",
    "limit_rhs",
    "linear_case_closed_form",
    "logistic_case_closed_form",
    "mean_component",
    "moment_estimate",
    "phase_diagram",
    "rhs_coefficients",
    "sample_moment",
    "simulate_cbi",
    "simulate_culled_frequency",
    "simulate_culling_chain",
    "simulate_dual",
    "term_bundle",
    "theta_k",
    "validate_params",
]
