"""Nonparametric MANOVA in unweighted Mann-Whitney-type relative effects."""

__version__ = "0.1.0"

from .covariance import eigen_diagnostic, rho_hat, sigma_hat, tau_hat
from .data import Dataset, FactorialLayout, flat_index, validate
from .design import (
    HypothesisDesign,
    all_effects,
    component_design,
    factorial_design,
    one_way,
    pair_design,
    projection,
    subset_design,
    two_way,
)
from .exceptions import ConfigError, InputError, NumericalError, RankManovaError
from .inference import (
    BootstrapResult,
    MultiplierScheme,
    ats,
    classical_test,
    critical_value,
    run_test,
    wild_test,
)
from .posthoc import HypothesisFamily, bonferroni, closed_test, hierarchical_plan, holm
from .ranks import ecdf, effects, pairwise_effect, pairwise_effects

__all__ = [
    "BootstrapResult", "ConfigError", "Dataset", "FactorialLayout", "HypothesisDesign",
    "HypothesisFamily", "InputError", "MultiplierScheme", "NumericalError", "RankManovaError",
    "all_effects", "ats", "bonferroni", "classical_test", "closed_test", "component_design",
    "critical_value", "ecdf", "effects", "eigen_diagnostic", "factorial_design", "flat_index",
    "hierarchical_plan", "holm", "one_way", "pair_design", "pairwise_effect", "pairwise_effects",
    "projection", "rho_hat", "run_test", "sigma_hat", "subset_design", "tau_hat", "two_way",
    "validate", "wild_test",
]
