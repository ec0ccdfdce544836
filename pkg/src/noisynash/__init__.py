"""Complexity lower bounds and simulations for Nash equilibrium seeking over noisy links."""
from .bounds import (
    BoundReport,
    corollary1_bound,
    default_theorem4_candidates,
    theorem1_bound,
    theorem2_bound,
    theorem3_bound,
    theorem4_bound,
)
from .config import ScenarioConfig, parse_config
from .divergence import kl_expansion_check, kl_gaussian_shift, kl_numeric, mi_mixture_estimate
from .exceptions import *  # noqa: F401,F403
from .experiments import (
    NotReached,
    bound_comparison_report,
    empirical_complexity,
    fano_check,
    genie_decode,
    run_genie_test,
)
from .games import (
    HardEnsemble,
    QuadraticGame,
    build_quadratic_game,
    pseudo_gradient,
    theorem1_ensemble,
    theorem2_ensemble,
    utility,
    verify_ne,
)
from .geometry import Ball, Box, PackingResult, greedy_packing, lattice_count, lattice_lower_bound
from .noise import (
    ChannelConfig,
    Gaussian,
    Logistic,
    TabulatedPdf,
    Topology,
    covariance_sigma_AG,
    downlink_capacity,
    fisher_information,
    water_filling,
)
from .protocol import AlgorithmSpec, Trace, baseline_noisy_gradient, constant_step_gradient, empirical_power, run

__version__ = "0.1.0"
