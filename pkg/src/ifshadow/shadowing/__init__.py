"""Shadowing solver, grid oracle, hypothesis checkers and experiment drivers."""
from .checks import (ContractionReport, ExpansivityEstimate, SeparationHorizon, expansivity_search,
                     openness_check, separation_horizon, stable_contraction_check)
from .experiments import (ContinuityReport, LimitReport, continuity_experiment, delta_sweep,
                          limit_shadow_experiment, paired_ensemble)
from .oracle import brute_force_shadow, clusters, uniqueness_check
from .solver import (OpennessCertificate, ShadowResult, lipschitz_shadow, pullback_exact,
                     reverse_pseudo_orbit, shadow_batch, shadow_constant)

__all__ = [
    "ContractionReport", "ExpansivityEstimate", "SeparationHorizon", "expansivity_search",
    "openness_check", "separation_horizon", "stable_contraction_check", "ContinuityReport",
    "LimitReport", "continuity_experiment", "delta_sweep", "limit_shadow_experiment",
    "paired_ensemble", "brute_force_shadow", "clusters", "uniqueness_check", "OpennessCertificate",
    "ShadowResult", "lipschitz_shadow", "pullback_exact", "reverse_pseudo_orbit", "shadow_batch",
    "shadow_constant",
]
