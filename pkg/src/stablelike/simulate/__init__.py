"""Monte Carlo simulation of marginal and coupled paths."""

from .dominating import (Majorant, check_domination, majorant, radius_cdf, radius_quantile,
                         sample_dominating_jump)
from .paths import (CoupledPath, CouplingOutcome, DominationError, MarginalPath, SimConfig,
                    SimulationError, TruncationError, coupled_outcomes, marginal_terminal,
                    simulate_coupled, simulate_marginal)
from .estimates import (CouplingTail, SemigroupDifferences, binomial_ci, estimate_coupling_tail,
                        estimate_semigroup, semigroup_differences)
from .eventlog import read_event_log, write_event_log
from .rng import CounterRNG

__all__ = [
    "Majorant", "check_domination", "majorant", "radius_cdf", "radius_quantile",
    "sample_dominating_jump", "CoupledPath", "CouplingOutcome", "DominationError",
    "MarginalPath", "SimConfig", "SimulationError", "TruncationError", "coupled_outcomes",
    "marginal_terminal", "simulate_coupled", "simulate_marginal", "CounterRNG",
    "CouplingTail", "SemigroupDifferences", "binomial_ci", "estimate_coupling_tail",
    "estimate_semigroup", "semigroup_differences", "read_event_log", "write_event_log",
]
