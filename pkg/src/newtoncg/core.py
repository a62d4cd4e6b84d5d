"""Shared plumbing: problems, vectors, cost counters, RNG and solver configuration."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class NewtonCGError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(NewtonCGError, ValueError):
    pass


class ConfigError(NewtonCGError, ValueError):
    pass


class PreconditionError(NewtonCGError, ValueError):
    pass


class NumericalFailure(NewtonCGError, ArithmeticError):
    """A non-finite value appeared during an evaluation.

    The offending values are kept on ``values`` for diagnosis.
    """

    def __init__(self, message, values=None):
        super().__init__(message)
        self.values = values


class InvariantViolation(NewtonCGError, RuntimeError):
    """An internal guarantee of the algorithm failed to hold."""


class LineSearchFailure(NewtonCGError):
    def __init__(self, message, best_j=None, best_f=None):
        super().__init__(message)
        self.best_j = best_j
        self.best_f = best_f


Operator = Callable[[np.ndarray], np.ndarray]


def as_vector(x, n: Optional[int] = None, name: str = "vector") -> np.ndarray:
    """Return ``x`` as a finite 1-D float64 array, checking its length against ``n``."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"{name} must be one-dimensional, got shape {v.shape}")
    if n is not None and v.shape[0] != n:
        raise DimensionError(f"{name} has length {v.shape[0]}, expected {n}")
    if not np.all(np.isfinite(v)):
        raise NumericalFailure(f"{name} contains non-finite entries", values=v)
    return v


@dataclass(frozen=True)
class ObjectiveProblem:
    """A smooth objective available through f, its gradient and Hessian-vector products.

    The three callables take plain float64 arrays; ``hvp(x, v)`` must be linear
    and symmetric in ``v``.
    """

    n: int
    f: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    hvp: Callable[[np.ndarray, np.ndarray], np.ndarray]
    name: str = "problem"

    def __post_init__(self):
        if int(self.n) < 1:
            raise DimensionError("problem dimension must be positive")


@dataclass
class CostCounters:
    hvp_count: int = 0
    grad_count: int = 0
    f_count: int = 0

    @property
    def total(self) -> int:
        """Hessian-vector products plus gradient evaluations (the unit-cost model)."""
        return self.hvp_count + self.grad_count

    def as_dict(self) -> dict:
        return {
            "hvp_count": self.hvp_count,
            "grad_count": self.grad_count,
            "f_count": self.f_count,
        }


def counted_f(problem: ObjectiveProblem, x: np.ndarray, counters: CostCounters) -> float:
    counters.f_count += 1
    value = float(problem.f(x))
    if not math.isfinite(value):
        raise NumericalFailure("objective value is not finite", values=value)
    return value


def counted_grad(problem: ObjectiveProblem, x: np.ndarray, counters: CostCounters) -> np.ndarray:
    counters.grad_count += 1
    g = np.asarray(problem.grad(x), dtype=np.float64)
    if g.shape != (problem.n,):
        raise DimensionError(f"gradient has shape {g.shape}, expected ({problem.n},)")
    if not np.all(np.isfinite(g)):
        raise NumericalFailure("gradient is not finite", values=g)
    return g


def counted_hvp(problem: ObjectiveProblem, x: np.ndarray, v: np.ndarray,
                counters: CostCounters) -> np.ndarray:
    """Evaluate the Hessian-vector product at ``x`` along ``v`` and count it."""
    x = as_vector(x, problem.n, "x")
    v = as_vector(v, problem.n, "v")
    counters.hvp_count += 1
    hv = np.asarray(problem.hvp(x, v), dtype=np.float64)
    if hv.shape != (problem.n,):
        raise DimensionError(f"hvp output has shape {hv.shape}, expected ({problem.n},)")
    if not np.all(np.isfinite(hv)):
        raise NumericalFailure("Hessian-vector product is not finite", values=hv)
    return hv


def hessian_operator(problem: ObjectiveProblem, x: np.ndarray, counters: CostCounters) -> Operator:
    """Bind ``x`` so the Hessian acts as a counted linear operator ``v -> H v``."""
    x = as_vector(x, problem.n, "x")
    return lambda v: counted_hvp(problem, x, v, counters)


class CountingOperator:
    """Wrap a plain operator and count how many times it is applied."""

    def __init__(self, op: Operator):
        self._op = op
        self.calls = 0

    def __call__(self, v):
        self.calls += 1
        out = np.asarray(self._op(v), dtype=np.float64)
        if not np.all(np.isfinite(out)):
            raise NumericalFailure("operator output is not finite", values=out)
        return out


def dense_operator(matrix) -> Operator:
    a = np.asarray(matrix, dtype=np.float64)
    return lambda v: a @ v


# ---------------------------------------------------------------- randomness

_SEED_MASK = (1 << 64) - 1


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Deterministic PCG64 stream for ``seed``; extra integers select an independent sub-stream."""
    entropy = [int(seed) & _SEED_MASK] + [int(s) & _SEED_MASK for s in stream]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def sample_unit_sphere(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform sample on the unit sphere in R^n (normalized standard normal)."""
    if n < 1:
        raise DimensionError("sphere dimension must be at least 1")
    while True:
        z = rng.standard_normal(n)
        nrm = np.linalg.norm(z)
        if nrm > 0.0:
            return z / nrm


# ------------------------------------------------------------- configuration

class OracleKind(str, enum.Enum):
    LANCZOS_KNOWN_M = "lanczos"
    LANCZOS_ADAPTIVE = "lanczos-adaptive"
    CG_PROBE = "cg-probe"
    DENSE_EXACT = "dense"


class StoragePolicy(str, enum.Enum):
    FULL = "full"
    SCALARS_ONLY = "scalars-only"


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and parameters of the outer Newton-CG loop.

    ``eps_h`` must lie in (0, 1) because it doubles as the damping parameter
    of the inner Capped CG solve.
    """

    eps_g: float
    eps_h: float
    theta: float = 0.5
    zeta: float = 0.5
    eta: float = 0.1
    delta: float = 0.05
    m_bound: Optional[float] = None
    max_outer_iters: int = 1000
    max_ls_iters: int = 60
    rng_seed: int = 0
    oracle_kind: OracleKind = OracleKind.LANCZOS_ADAPTIVE
    storage: StoragePolicy = field(default=StoragePolicy.SCALARS_ONLY)

    def __post_init__(self):
        object.__setattr__(self, "oracle_kind", OracleKind(self.oracle_kind))
        object.__setattr__(self, "storage", StoragePolicy(self.storage))
        if not self.eps_g > 0:
            raise ConfigError("eps_g must be positive")
        if not 0 < self.eps_h < 1:
            raise ConfigError("eps_h must lie in (0, 1)")
        if not 0 < self.theta < 1:
            raise ConfigError("theta must lie in (0, 1)")
        if not 0 < self.zeta < 1:
            raise ConfigError("zeta must lie in (0, 1)")
        if not self.eta > 0:
            raise ConfigError("eta must be positive")
        if not 0 <= self.delta < 1:
            raise ConfigError("delta must lie in [0, 1)")
        if self.m_bound is not None and not self.m_bound >= 0:
            raise ConfigError("m_bound must be nonnegative")
        if int(self.max_outer_iters) < 1 or int(self.max_ls_iters) < 1:
            raise ConfigError("iteration limits must be positive")
        for name in ("eps_g", "eps_h", "theta", "zeta", "eta", "delta"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")
