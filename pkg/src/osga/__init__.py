"""Optimal subgradient algorithm (OSGA) for convex minimization."""

from .oracle import EvalCounter, FunctionObjective, Objective, OracleError, eval_pair, eval_value
from .prox import Preconditioner, QuadraticProx, SubproblemSolution, default_q0
from .solver import (
    Relaxation,
    RunResult,
    SolverState,
    StepReport,
    StoppingRule,
    TuningParams,
    accumulate_relaxation,
    init_state,
    iterate,
    solve,
    solve_iter,
    update_scheme,
)
from .history import IterationRecord, RunHistory

__all__ = [
    "EvalCounter", "FunctionObjective", "Objective", "OracleError", "eval_pair", "eval_value",
    "Preconditioner", "QuadraticProx", "SubproblemSolution", "default_q0",
    "Relaxation", "RunResult", "SolverState", "StepReport", "StoppingRule", "TuningParams",
    "accumulate_relaxation", "init_state", "iterate", "solve", "solve_iter", "update_scheme",
    "IterationRecord", "RunHistory",
]
