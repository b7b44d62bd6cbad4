"""Version Age of Information (VAoI) under rate-constrained update policies.

Closed-form occupancy laws for single-hop links, a constrained-MDP solver,
relay-chain results, and a seeded Monte Carlo simulator.
"""

from .analytic_singlehop import (
    InfeasibleTargetError,
    RateRequirement,
    ThresholdSolution,
    mean_rs,
    mean_threshold,
    mean_uniform,
    optimal_threshold,
    rate_of_threshold,
    required_rate,
    stationary_optimal,
    stationary_rs,
    stationary_threshold,
    stationary_uniform,
)
from .cmdp import CmdpSolution, NonConvergenceError, extract_threshold, relative_value_iteration, solve_cmdp
from .core import (
    MixedThreshold,
    MultiHopTopology,
    ParameterError,
    Pmf,
    RandomizedStationary,
    SystemParams,
    Tabular,
    Threshold,
    Uniform,
    pmf_mean,
    pmf_tail_mass,
    pmf_total_variation,
    validate_params,
)
from .multihop import beta_mean, dest_mean, tau_normal_approx, tau_pmf_convolution, tau_pmf_negbin
from .simulator import SimConfig, SimResult, empirical_tau, simulate_multihop, simulate_singlehop

__version__ = "0.1.0"

__all__ = [
    "CmdpSolution",
    "InfeasibleTargetError",
    "MixedThreshold",
    "MultiHopTopology",
    "NonConvergenceError",
    "ParameterError",
    "Pmf",
    "RandomizedStationary",
    "RateRequirement",
    "SimConfig",
    "SimResult",
    "SystemParams",
    "Tabular",
    "Threshold",
    "ThresholdSolution",
    "Uniform",
    "beta_mean",
    "dest_mean",
    "empirical_tau",
    "extract_threshold",
    "mean_rs",
    "mean_threshold",
    "mean_uniform",
    "optimal_threshold",
    "pmf_mean",
    "pmf_tail_mass",
    "pmf_total_variation",
    "rate_of_threshold",
    "relative_value_iteration",
    "required_rate",
    "simulate_multihop",
    "simulate_singlehop",
    "solve_cmdp",
    "stationary_optimal",
    "stationary_rs",
    "stationary_threshold",
    "stationary_uniform",
    "tau_normal_approx",
    "tau_pmf_convolution",
    "tau_pmf_negbin",
    "validate_params",
]
