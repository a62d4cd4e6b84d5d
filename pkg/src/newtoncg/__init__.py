"""Damped Newton-CG for smooth nonconvex minimization with second-order guarantees."""
from .bounds import BoundsReport, compute_bounds
from .capped_cg import CappedCgOutcome, DType, find_nc_pair
from .capped_cg import run as run_capped_cg
from .core import (
    ConfigError,
    CostCounters,
    DimensionError,
    InvariantViolation,
    LineSearchFailure,
    NewtonCGError,
    NumericalFailure,
    ObjectiveProblem,
    OracleKind,
    PreconditionError,
    SolverConfig,
    StoragePolicy,
)
from .eig_oracle import OracleOutcome, OutcomeKind, run_oracle
from .newton_cg import SolverReport, Status, StepKind, StepRecord, solve, verify_second_order

__all__ = [
    "BoundsReport", "CappedCgOutcome", "ConfigError", "CostCounters", "DType", "DimensionError",
    "InvariantViolation", "LineSearchFailure", "NewtonCGError", "NumericalFailure",
    "ObjectiveProblem", "OracleKind", "OracleOutcome", "OutcomeKind", "PreconditionError",
    "SolverConfig", "SolverReport", "Status", "StepKind", "StepRecord", "StoragePolicy",
    "compute_bounds", "find_nc_pair", "run_capped_cg", "run_oracle", "solve", "verify_second_order",
]
__version__ = "0.1.0"
