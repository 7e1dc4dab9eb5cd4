"""Exact and Monte Carlo experiments on soft covering over discrete
memoryless channels."""

from .measures import (
    Channel,
    JointPair,
    ProbVector,
    binary_entropy,
    binary_symmetric_pair,
    entropy,
    kl_divergence,
    load_pair,
    make_pair,
    mutual_information,
    output_marginal,
    renyi_divergence,
    tensor_power,
    total_variation,
    validate_distribution,
)
from .exponents import (
    ExponentReport,
    atypical_probability_exact,
    beta_exponent,
    chernoff_rhs_mass,
    chernoff_rhs_ratio,
    default_parameters,
    deterministic_kl_ceiling,
    rate_certificate,
    union_bound_failure,
)
from .covering import (
    Codebook,
    codebook_in_S,
    complete_codebook,
    density_ratio,
    induced_distribution,
    jensen_decomposition,
    kl_exact,
    sample_codebook,
    tv_exact,
    typicality_split,
)
from .experiments import decay_sweep, failure_rate, mc_trials, wiretap_experiment

__version__ = "0.1.0"
