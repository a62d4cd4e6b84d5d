"""Outer Damped Newton-CG loop with a cubic-decrease backtracking line search.

Each iteration either solves the damped Newton system with Capped CG (when
the gradient is large) or asks a minimum-eigenvalue oracle for a direction of
negative curvature (when it is small). It stops when the oracle certifies
that the Hessian is nearly positive semidefinite.
"""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional

import numpy as np

from . import bounds, capped_cg
from .core import (
    CostCounters,
    LineSearchFailure,
    NumericalFailure,
    ObjectiveProblem,
    Operator,
    PreconditionError,
    SolverConfig,
    as_vector,
    counted_f,
    counted_grad,
    hessian_operator,
    make_rng,
)
from .eig_oracle import OracleOutcome, dense_reference_eig, densify, run_oracle


class StepKind(str, enum.Enum):
    DAMPED_NEWTON = "DampedNewton"
    CAPPED_CG_NC = "CappedCgNC"
    ORACLE_NC = "OracleNC"
    TERMINAL = "Terminal"


class Status(str, enum.Enum):
    SECOND_ORDER_POINT = "SecondOrderPoint"
    MAX_ITERS = "MaxIters"
    LINE_SEARCH_FAIL = "LineSearchFail"
    NUMERICAL_FAIL = "NumericalFail"


@dataclass
class StepRecord:
    k: int
    step_kind: StepKind
    d_norm: float
    alpha: float
    j_k: int
    f_before: float
    f_after: float
    grad_norm: float
    inner_iters: int
    hvp_used: int
    # None when no Hessian Lipschitz constant was supplied
    decrease_bound_ok: Optional[bool] = None

    def as_dict(self) -> dict:
        out = asdict(self)
        out["step_kind"] = self.step_kind.value
        return out


@dataclass
class StepInfo:
    """Vectors behind one step, handed to the optional solver callback."""

    k: int
    step_kind: StepKind
    x: np.ndarray
    g: np.ndarray
    d: Optional[np.ndarray]
    raw_direction: Optional[np.ndarray]
    capped_cg: Optional[capped_cg.CappedCgOutcome] = None
    oracle: Optional[OracleOutcome] = None


@dataclass
class SolverReport:
    status: Status
    x_final: np.ndarray
    f_final: float
    grad_norm_final: float
    trace: List[StepRecord] = field(default_factory=list)
    counters: CostCounters = field(default_factory=CostCounters)
    certificate_delta: Optional[float] = None
    message: str = ""

    @property
    def outer_iterations(self) -> int:
        return sum(1 for r in self.trace if r.step_kind is not StepKind.TERMINAL)


def scale_nc_direction(d, g, hvp_at_x: Optional[Operator] = None, d_hd: Optional[float] = None):
    """Rescale a negative-curvature direction to length |d'Hd|/||d||^2, pointing downhill.

    The sign is -sgn(d'g) with sgn(0) = +1. ``d_hd`` (the value d'Hd) may be
    passed when already known, saving a Hessian-vector product.
    """
    d = as_vector(d, name="d")
    g = as_vector(g, d.shape[0], "g")
    dd = float(d @ d)
    if dd == 0.0:
        raise PreconditionError("cannot scale a zero direction")
    if d_hd is None:
        if hvp_at_x is None:
            raise PreconditionError("need either hvp_at_x or d_hd")
        d_hd = float(d @ hvp_at_x(d))
    sign = -1.0 if float(d @ g) < 0.0 else 1.0
    return -sign * (abs(d_hd) / dd) * (d / math.sqrt(dd))


def backtracking_line_search(problem: ObjectiveProblem, x, d, eta: float, theta: float,
                             max_ls: int, counters: CostCounters, f_x: Optional[float] = None):
    """Return ``(alpha, j, f_new)`` for the smallest j in [0, max_ls] with cubic decrease.

    Accepts alpha = theta**j once f(x + alpha d) < f(x) - eta/6 alpha^3 ||d||^3.
    Trial points where f is not finite count as rejections.
    """
    x = as_vector(x, problem.n, "x")
    d = as_vector(d, problem.n, "d")
    dnorm3 = float(np.linalg.norm(d)) ** 3
    if dnorm3 == 0.0:
        raise PreconditionError("line search needs a nonzero direction")
    if f_x is None:
        f_x = counted_f(problem, x, counters)
    best_j, best_f = None, math.inf
    for j in range(max_ls + 1):
        alpha = theta**j
        counters.f_count += 1
        f_new = float(problem.f(x + alpha * d))
        if not math.isfinite(f_new):
            continue
        if f_new < best_f:
            best_j, best_f = j, f_new
        if f_new < f_x - eta / 6.0 * alpha**3 * dnorm3:
            return alpha, j, f_new
    raise LineSearchFailure(f"no step length theta^j with j <= {max_ls} gives cubic decrease",
                            best_j=best_j, best_f=best_f)


def _slack(f):
    # absorbs rounding in f_before - f_after when auditing decrease bounds
    return 1e-12 * max(1.0, abs(f))


def solve(problem: ObjectiveProblem, x0, config: SolverConfig, l_h: Optional[float] = None,
          callback: Optional[Callable[[StepInfo], None]] = None) -> SolverReport:
    """Run Damped Newton-CG from ``x0``.

    When ``l_h`` (a Lipschitz constant of the Hessian) is given, every step's
    decrease is audited against the analytic constants and the result lands
    in ``StepRecord.decrease_bound_ok``; the iteration itself never uses it.
    Failures are reported through ``SolverReport.status`` rather than raised.
    """
    counters = CostCounters()
    rng = make_rng(config.rng_seed)
    eps_g, eps_h = config.eps_g, config.eps_h
    x = as_vector(x0, problem.n, "x0")
    trace: List[StepRecord] = []
    c_sol = c_nc = None
    if l_h is not None:
        c_sol = bounds.c_sol(l_h, config.eta, config.zeta, config.theta)
        c_nc = bounds.c_nc(l_h, config.eta, config.theta)
    m_tracked = float(config.m_bound) if config.m_bound else 0.0
    pending: Optional[StepRecord] = None
    status, message, cert_delta = Status.MAX_ITERS, "", None
    f = math.nan
    gnorm = math.nan

    def settle(record, next_gnorm):
        # SOL-step audits need the gradient at the new point
        bound = c_sol * min(next_gnorm**3 / eps_h**3, eps_h**3)
        record.decrease_bound_ok = record.f_before - record.f_after + _slack(record.f_before) >= bound

    try:
        f = counted_f(problem, x, counters)
        for k in range(config.max_outer_iters + 1):
            g = counted_grad(problem, x, counters)
            gnorm = float(np.linalg.norm(g))
            if pending is not None:
                settle(pending, gnorm)
                pending = None
            if k == config.max_outer_iters:
                break
            hess = hessian_operator(problem, x, counters)
            cg_out = oracle_out = None
            if gnorm > eps_g:
                cg_out, _ = capped_cg.run(hess, g, eps_h, config.zeta,
                                          m0=m_tracked if m_tracked > 0 else None,
                                          store_iterates=config.storage)
                m_tracked = max(m_tracked, cg_out.final_params.m)
                raw = cg_out.d
                if cg_out.d_type is capped_cg.DType.SOL:
                    kind, d = StepKind.DAMPED_NEWTON, raw
                else:
                    kind, d = StepKind.CAPPED_CG_NC, scale_nc_direction(raw, g, d_hd=cg_out.d_hd)
                inner, used = cg_out.iterations, cg_out.hvp_used
            else:
                m_hint = config.m_bound if config.m_bound else (m_tracked or None)
                oracle_out = run_oracle(config.oracle_kind, hess, problem.n, eps_h, config.delta,
                                        rng, m=m_hint)
                inner, used = oracle_out.iterations, oracle_out.hvp_used
                if oracle_out.is_certificate:
                    trace.append(StepRecord(k, StepKind.TERMINAL, 0.0, 0.0, 0, f, f, gnorm,
                                            inner, used))
                    if callback:
                        callback(StepInfo(k, StepKind.TERMINAL, x, g, None, None, oracle=oracle_out))
                    status, cert_delta = Status.SECOND_ORDER_POINT, oracle_out.delta_used
                    break
                raw = oracle_out.v
                kind, d = StepKind.ORACLE_NC, scale_nc_direction(raw, g, d_hd=oracle_out.lam)

            alpha, j_k, f_new = backtracking_line_search(problem, x, d, config.eta, config.theta,
                                                         config.max_ls_iters, counters, f_x=f)
            record = StepRecord(k, kind, float(np.linalg.norm(d)), alpha, j_k, f, f_new, gnorm,
                                inner, used)
            if c_sol is not None:
                if kind is StepKind.DAMPED_NEWTON:
                    pending = record
                else:
                    record.decrease_bound_ok = f - f_new + _slack(f) >= c_nc / 8.0 * eps_h**3
            trace.append(record)
            if callback:
                callback(StepInfo(k, kind, x, g, d, raw, capped_cg=cg_out, oracle=oracle_out))
            x = x + alpha * d
            f = f_new
        if status is Status.MAX_ITERS:
            message = f"stopped after {config.max_outer_iters} outer iterations"
    except LineSearchFailure as exc:
        status, message = Status.LINE_SEARCH_FAIL, str(exc)
    except NumericalFailure as exc:
        status, message = Status.NUMERICAL_FAIL, str(exc)

    return SolverReport(status=status, x_final=x, f_final=f, grad_norm_final=gnorm, trace=trace,
                        counters=counters, certificate_delta=cert_delta, message=message)


@dataclass(frozen=True)
class SecondOrderCheck:
    grad_ok: bool
    eig_ok: bool
    lambda_min: float


def verify_second_order(problem: ObjectiveProblem, x, eps_g: float, eps_h: float) -> SecondOrderCheck:
    """Dense ground-truth check of the approximate second-order conditions (small n only)."""
    x = as_vector(x, problem.n, "x")
    g = np.asarray(problem.grad(x), dtype=np.float64)
    h = densify(lambda v: problem.hvp(x, v), problem.n)
    lam, _ = dense_reference_eig(0.5 * (h + h.T))
    return SecondOrderCheck(bool(np.linalg.norm(g) <= eps_g), bool(lam >= -eps_h), lam)
