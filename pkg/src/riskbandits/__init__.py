"""Risk-aware best-arm identification under a fixed budget.

Library layout:

- :mod:`riskbandits.distributions` -- loss families, sampling, ground truth
- :mod:`riskbandits.estimators` -- empirical / truncated / median-of-bins
- :mod:`riskbandits.bandit` -- generalized successive rejects and schedules
- :mod:`riskbandits.bounds` -- closed-form deviation bounds and thresholds
- :mod:`riskbandits.harness` -- Monte Carlo error-probability experiments
- :mod:`riskbandits.cli` -- command-line entry point
"""

from .bandit import (
    BanditInstance,
    PhaseSchedule,
    RiskObjective,
    halving_schedule,
    run_ra_gsr,
    sr_schedule,
    uniform_schedule,
)
from .distributions import (
    Constant,
    Exponential,
    Gaussian,
    GroundTruth,
    Lomax,
    Pareto,
    TailInflated,
    ground_truth,
    sample,
    solve_mean_for_cvar,
)
from .estimators import (
    EstimatorSpec,
    empirical_cvar,
    estimate,
    median_of_cvars,
    median_of_means,
    truncated_cvar,
    truncated_mean,
)

__version__ = "0.1.0"

__all__ = [
    "BanditInstance",
    "PhaseSchedule",
    "RiskObjective",
    "halving_schedule",
    "run_ra_gsr",
    "sr_schedule",
    "uniform_schedule",
    "Constant",
    "Exponential",
    "Gaussian",
    "GroundTruth",
    "Lomax",
    "Pareto",
    "TailInflated",
    "ground_truth",
    "sample",
    "solve_mean_for_cvar",
    "EstimatorSpec",
    "empirical_cvar",
    "estimate",
    "median_of_cvars",
    "median_of_means",
    "truncated_cvar",
    "truncated_mean",
    "__version__",
]
