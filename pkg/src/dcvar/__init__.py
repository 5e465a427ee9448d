"""Scenario-based portfolio selection under a Value-at-Risk floor.

Expected-return maximization over the simplex with a penalized VaR
constraint, written as a difference of convex functions through a
two-level CVaR identity and solved by plain or boosted subgradient-QP
descent.  Submodules: data (ingestion, summaries, synthetic draws), risk
(tail measures), objective (penalty and convex split), subproblem
(epigraph QP), solvers (descent loops), bench (experiment harness), cli.
"""

from .bench import (
    BootstrapCI,
    CellSummary,
    ExperimentGrid,
    InitScheme,
    RunRecord,
    aggregate,
    bootstrap_ci,
    run_experiment,
    sample_start,
)
from .data import (
    DataError,
    DatasetReadError,
    ScenarioSet,
    SummaryStats,
    SyntheticSpec,
    ValidationError,
    generate_synthetic,
    load_scenarios,
    portfolio_returns,
    summary_stats,
)
from .objective import ObjectiveValue, ProblemSpec
from .risk import DCLevels, TailIndex, discrete_cvar, discrete_var, ru_cvar
from .solvers import (
    IterationTrace,
    SolveResult,
    SolverConfig,
    bdca_solve,
    dca_solve,
    solve,
)

__all__ = [
    "BootstrapCI",
    "CellSummary",
    "ExperimentGrid",
    "InitScheme",
    "RunRecord",
    "aggregate",
    "bootstrap_ci",
    "run_experiment",
    "sample_start",
    "DataError",
    "DatasetReadError",
    "ValidationError",
    "ScenarioSet",
    "SummaryStats",
    "SyntheticSpec",
    "generate_synthetic",
    "load_scenarios",
    "portfolio_returns",
    "summary_stats",
    "ObjectiveValue",
    "ProblemSpec",
    "DCLevels",
    "TailIndex",
    "discrete_cvar",
    "discrete_var",
    "ru_cvar",
    "IterationTrace",
    "SolveResult",
    "SolverConfig",
    "bdca_solve",
    "dca_solve",
    "solve",
]
