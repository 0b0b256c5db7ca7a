"""Mean-variance analysis in Bayesian optimization on finite grids."""

__version__ = "0.1.0"

from .benchmarks import Benchmark, make_benchmark
from .bounds import EnvDistribution, RiskBoundTable, risk_bounds, scalarized_bounds
from .gp import BetaSchedule, GpPosterior, KernelSpec, Observation, beta, posterior_query, update
from .metrics import GroundTruth, epsilon_pareto_check, ground_truth, hypervolume_gap, regret
from .scenarios import ScenarioConfig, estimate_pareto, run_scenario

__all__ = [
    "Benchmark",
    "BetaSchedule",
    "EnvDistribution",
    "GpPosterior",
    "GroundTruth",
    "KernelSpec",
    "Observation",
    "RiskBoundTable",
    "ScenarioConfig",
    "beta",
    "epsilon_pareto_check",
    "estimate_pareto",
    "ground_truth",
    "hypervolume_gap",
    "make_benchmark",
    "posterior_query",
    "regret",
    "risk_bounds",
    "run_scenario",
    "scalarized_bounds",
    "update",
]
