"""Single-loop gap-function solver for constrained bilevel problems."""

from ._core import (
    BilevelProblem,
    ConfigError,
    EvaluationError,
    GapParams,
    MinimaxBilevelProblem,
    RunTrace,
    SolverConfig,
    gap_gradient,
    gap_value,
    gradcheck,
    lambda_star,
    penalty_at,
    problem_names,
    run,
    run_minimax,
    sgl,
    sweep,
    synthetic,
    theta_star,
    toy_minimax,
    validate_gradients,
)

__all__ = [
    "BilevelProblem",
    "ConfigError",
    "EvaluationError",
    "GapParams",
    "MinimaxBilevelProblem",
    "RunTrace",
    "SolverConfig",
    "gap_gradient",
    "gap_value",
    "gradcheck",
    "lambda_star",
    "penalty_at",
    "problem_names",
    "run",
    "run_minimax",
    "sgl",
    "sweep",
    "synthetic",
    "theta_star",
    "toy_minimax",
    "validate_gradients",
]
