"""Finite approximations of Dirichlet, stable, Poisson-Dirichlet and
normalized inverse-Gaussian random probability measures."""

from .diagnostics import (
    ErrorReport,
    MomentPair,
    ProcessSpec,
    chebyshev_bound_nigp,
    chebyshev_bound_pdp,
    empirical_order_prob,
    empirical_order_probs,
    error_report,
    lemma1_prob,
    lemma1_prob_mc,
    nigp_moments,
    pdp_moments,
    simulate_paths,
)
from .errors import DomainError, NumericalError, TruncationOverflowError
from .random_measures import (
    BaseMeasure,
    DiscreteRandomMeasure,
    PdpParams,
    TruncationRule,
    dp_new,
    evaluate_cdf,
    nigp_new,
    nigp_stick,
    pdp_new,
    pdp_stick,
    stable_new,
)
from .rng import RngStream
from .special_functions import (
    IGParams,
    beta_cdf,
    beta_sample,
    gamma_arrivals,
    gamma_quantile,
    half_stable_sample,
    ig_quantile,
    ig_sample,
    upper_incomplete_gamma,
    xi,
)

__version__ = "0.1.0"
