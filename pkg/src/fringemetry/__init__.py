"""Simulation and analysis toolkit for interference-fringe phase
estimation with correlated two-mode inputs.

The package covers the full protocol end to end: input-state
construction and squeezing summaries, one- and two-body fringe
densities, asymptotic estimator variances, exact sequential position
sampling, detection-noise channels, and Monte-Carlo estimation
campaigns.
"""

__version__ = "0.1.0"

from .densities import DensityModel, Protocol, WavePacket, \
    envelope_density, mzi_densities, mzi_outcome_probs, p1_pattern, \
    p2_pattern, pattern_model, wrap_angle
from .errors import DegenerateModelError, FringemetryError, \
    InvariantViolation, NumericalError, QuadratureError, ValidationError
from .estimation import CampaignConfig, CampaignResult, fit_estimate, \
    log_likelihood, mle_estimate, mzi_estimate, run_campaign
from .noise import NoiseSpec, apply_noise, blur, fluorescence, thin
from .sampling import ReducedState, Shot, apply_field_operator, \
    initial_reduced, sample_binned, sample_mzi_counts, sample_shot
from .states import AngularMoments, SqueezingSummary, TwoModeState, \
    beam_splitter, chi_for_xi_phi, coherent_state, gaussian_phase_squeezed, \
    ground_state, moments, optimal_chi, summarize, xi_phi_of
from .theory import OptimalState, ScalingRow, VarianceReport, \
    correlation_c, fisher_f1, fit_power_law, fluorescence_threshold, \
    gaussian_scaling_optimum, gaussian_two_term, optimal_pattern_state, \
    qfi_bound, scaling_sweep, variance_fit, variance_fit_fluorescence, \
    variance_fit_pattern, variance_mle, variance_mzi, variance_pattern, \
    variance_pattern_noisy

__all__ = [
    "AngularMoments", "CampaignConfig", "CampaignResult", "DensityModel",
    "DegenerateModelError", "FringemetryError", "InvariantViolation",
    "NoiseSpec", "NumericalError", "OptimalState", "Protocol",
    "QuadratureError", "ReducedState", "ScalingRow", "Shot",
    "SqueezingSummary", "TwoModeState", "ValidationError",
    "VarianceReport", "WavePacket", "apply_field_operator", "apply_noise",
    "beam_splitter", "blur", "chi_for_xi_phi", "coherent_state",
    "correlation_c", "envelope_density", "fisher_f1", "fit_estimate",
    "fit_power_law", "fluorescence", "fluorescence_threshold",
    "gaussian_phase_squeezed", "gaussian_scaling_optimum",
    "gaussian_two_term", "ground_state", "initial_reduced",
    "log_likelihood", "mle_estimate", "moments", "mzi_densities",
    "mzi_estimate", "mzi_outcome_probs", "optimal_chi",
    "optimal_pattern_state", "p1_pattern", "p2_pattern", "pattern_model",
    "qfi_bound", "run_campaign", "sample_binned", "sample_mzi_counts",
    "sample_shot", "scaling_sweep", "summarize", "thin", "variance_fit",
    "variance_fit_fluorescence", "variance_fit_pattern", "variance_mle",
    "variance_mzi", "variance_pattern", "variance_pattern_noisy",
    "wrap_angle", "xi_phi_of",
]
