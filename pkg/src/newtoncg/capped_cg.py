"""Capped conjugate gradient on the damped system (H + 2 eps I) y = -g.

CG is monitored for curvature below ``eps`` along iterates and search
directions, and for residuals that decay more slowly than a strongly convex
system would allow. In the latter case a direction of weak curvature is
recovered as a difference of two iterates, using only the stored step lengths
and residual norms to locate it.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .core import (
    ConfigError,
    InvariantViolation,
    NumericalFailure,
    Operator,
    PreconditionError,
    StoragePolicy,
    as_vector,
)
from .krylov import cg_step


class DType(str, enum.Enum):
    SOL = "SOL"
    NC = "NC"


@dataclass(frozen=True)
class DerivedParams:
    m: float
    kappa: float
    zeta_hat: float
    tau: float
    t_cap: float


def derived_params(m: float, eps: float, zeta: float) -> DerivedParams:
    if not 0 < eps < 1:
        raise ConfigError(f"damping eps must lie in (0, 1), got {eps}")
    if not 0 < zeta < 1:
        raise ConfigError(f"zeta must lie in (0, 1), got {zeta}")
    if not m >= 0:
        raise ConfigError(f"m must be nonnegative, got {m}")
    kappa = (m + 2 * eps) / eps
    sk = math.sqrt(kappa)
    tau = sk / (sk + 1)
    t_cap = 4 * kappa**4 / (1 - math.sqrt(tau)) ** 2
    return DerivedParams(m=float(m), kappa=kappa, zeta_hat=zeta / (3 * kappa), tau=tau, t_cap=t_cap)


def _cap_holds(params: DerivedParams, j: int) -> bool:
    return math.sqrt(params.t_cap) * params.tau ** (j / 2) <= params.zeta_hat


def iteration_cap(m: float, eps: float, zeta: float, n: int) -> int:
    """min{n, J} with J the smallest integer such that sqrt(T) tau^(J/2) <= zeta_hat.

    J is estimated from logarithms and then corrected against the defining
    inequality itself.
    """
    if n < 1:
        raise ConfigError("n must be positive")
    params = derived_params(m, eps, zeta)
    estimate = math.log(params.zeta_hat**2 / params.t_cap) / math.log(params.tau)
    j = max(1, math.ceil(estimate))
    while j > 1 and _cap_holds(params, j - 1):
        j -= 1
    while not _cap_holds(params, j):
        j += 1
    return min(n, j)


@dataclass
class CgTrace:
    """Scalars (and optionally vectors) recorded along a Capped CG run.

    ``alphas[k]`` and ``r_norms_sq[k]`` are the step length and squared
    residual norm of iteration k; that is all the weak-curvature search
    needs. Under full storage the iterates y_k, residuals r_k and directions
    p_k are kept too.
    """

    g: np.ndarray
    eps: float
    alphas: List[float] = field(default_factory=list)
    r_norms_sq: List[float] = field(default_factory=list)
    iterates: Optional[List[np.ndarray]] = None
    residuals: Optional[List[np.ndarray]] = None
    directions: Optional[List[np.ndarray]] = None
    m_history: List[Tuple[int, float]] = field(default_factory=list)
    # y_{j+1} and H y_{j+1}, set when the residual-decay test fires
    y_last: Optional[np.ndarray] = None
    hy_last: Optional[np.ndarray] = None
    _hy: Optional[List[np.ndarray]] = field(default=None, repr=False)


@dataclass
class CappedCgOutcome:
    d_type: DType
    d: np.ndarray
    final_params: DerivedParams
    iterations: int
    hvp_used: int
    branch: str
    residual_final: Optional[float] = None
    nc_witness_curvature: Optional[float] = None
    d_hd: Optional[float] = None
    nc_pair_index: Optional[int] = None


class _Counted:
    def __init__(self, hvp):
        self.hvp = hvp
        self.calls = 0

    def __call__(self, v):
        self.calls += 1
        out = np.asarray(self.hvp(v), dtype=np.float64)
        if not np.all(np.isfinite(out)):
            raise NumericalFailure("Hessian-vector product is not finite", values=out)
        return out


def run(hvp: Operator, g, eps: float, zeta: float, m0: Optional[float] = None,
        store_iterates: StoragePolicy = StoragePolicy.SCALARS_ONLY,
        ) -> Tuple[CappedCgOutcome, CgTrace]:
    """Run Capped CG with operator ``hvp`` (v -> H v) and right-hand side ``-g``.

    Exactly one Hessian-vector product is spent per CG iteration plus one for
    the initial direction; products with iterates and residuals are carried
    along by recurrences. Returns the outcome and the recorded trace.
    """
    g = as_vector(g, name="g")
    gnorm = float(np.linalg.norm(g))
    if gnorm == 0.0:
        raise PreconditionError("Capped CG needs a nonzero right-hand side")
    store_iterates = StoragePolicy(store_iterates)
    full = store_iterates is StoragePolicy.FULL
    m = 0.0 if m0 is None else float(m0)
    params = derived_params(m, eps, zeta)
    H = _Counted(hvp)
    trace = CgTrace(g=g, eps=eps, m_history=[(0, m)])
    if full:
        trace.iterates, trace.residuals, trace.directions, trace._hy = [], [], [], []

    def raise_m(j, v, hv):
        nonlocal m, params
        nv = float(np.linalg.norm(v))
        if nv > 0.0:
            nhv = float(np.linalg.norm(hv))
            if nhv > m * nv:
                m = nhv / nv
                params = derived_params(m, eps, zeta)
                trace.m_history.append((j, m))

    def outcome(d_type, d, j, branch, **kw):
        return CappedCgOutcome(d_type=d_type, d=d, final_params=params, iterations=j,
                               hvp_used=H.calls, branch=branch, **kw), trace

    n = g.shape[0]
    y = np.zeros(n)
    hy = np.zeros(n)
    r = g.copy()
    p = -g
    rr = float(r @ r)
    r0 = gnorm

    hp = H(p)
    hbar_p = hp + 2 * eps * p
    pp = float(p @ p)
    p_hbar_p = float(p @ hbar_p)
    if p_hbar_p < eps * pp:
        return outcome(DType.NC, p, 0, "p0", nc_witness_curvature=p_hbar_p / pp,
                       d_hd=float(p @ hp))
    raise_m(0, p, hp)

    j = 0
    while True:
        if full:
            trace.iterates.append(y)
            trace._hy.append(hy)
            trace.residuals.append(r)
            trace.directions.append(p)
        alpha, y, r, p_next, rr_next, beta = cg_step(y, r, p, hbar_p, rr, p_hbar_p)
        trace.alphas.append(alpha)
        trace.r_norms_sq.append(rr)
        hy = hy + alpha * hp
        hp_prev = hp
        p, rr = p_next, rr_next
        j += 1

        hp = H(p)
        hr = -hp + beta * hp_prev
        hbar_p = hp + 2 * eps * p
        raise_m(j, p, hp)
        raise_m(j, y, hy)
        raise_m(j, r, hr)

        yy = float(y @ y)
        y_hbar_y = float(y @ hy) + 2 * eps * yy
        pp = float(p @ p)
        p_hbar_p = float(p @ hbar_p)
        rnorm = math.sqrt(rr)

        if y_hbar_y < eps * yy:
            return outcome(DType.NC, y, j, "y", nc_witness_curvature=y_hbar_y / yy,
                           d_hd=float(y @ hy))
        if rnorm <= params.zeta_hat * r0:
            return outcome(DType.SOL, y, j, "sol", residual_final=rnorm)
        if p_hbar_p < eps * pp:
            return outcome(DType.NC, p, j, "p", nc_witness_curvature=p_hbar_p / pp,
                           d_hd=float(p @ hp))
        if rnorm > math.sqrt(params.t_cap) * params.tau ** (j / 2) * r0:
            alpha_j = rr / p_hbar_p
            trace.alphas.append(alpha_j)
            trace.r_norms_sq.append(rr)
            if full:
                trace.iterates.append(y)
                trace._hy.append(hy)
                trace.residuals.append(r)
                trace.directions.append(p)
            trace.y_last = y + alpha_j * p
            trace.hy_last = hy + alpha_j * hp
            i, d, hd = _find_pair(H, trace, eps, j)
            dd = float(d @ d)
            d_hd = float(d @ hd)
            return outcome(DType.NC, d, j, "fourth", nc_witness_curvature=(d_hd + 2 * eps * dd) / dd,
                           d_hd=d_hd, nc_pair_index=i)


def curvature_ratio_from_scalars(trace: CgTrace, i: int, j: int) -> float:
    """Rayleigh quotient of y_{j+1} - y_i for the damped matrix, from stored scalars only."""
    if not (0 <= i <= j < len(trace.alphas)):
        raise PreconditionError(f"indices i={i}, j={j} out of range for a trace of length "
                                f"{len(trace.alphas)}")
    a = np.asarray(trace.alphas[: j + 1])
    rr = np.asarray(trace.r_norms_sq[: j + 1])
    w = a * rr
    suffix = np.cumsum(w[::-1])[::-1]  # suffix[k] = sum_{k'>=k} w[k']
    numerator = suffix[i]
    inner = np.where(np.arange(j + 1) <= i, suffix[i], suffix)
    denominator = float(np.sum(inner**2 / rr))
    if not denominator > 0.0:
        raise InvariantViolation("zero denominator in curvature ratio")
    return float(numerator / denominator)


def curvature_ratios_from_scalars(trace: CgTrace, j: int) -> np.ndarray:
    """``curvature_ratio_from_scalars(trace, i, j)`` for every i in 0..j, in O(j) work."""
    if not (0 <= j < len(trace.alphas)):
        raise PreconditionError(f"index j={j} out of range for a trace of length {len(trace.alphas)}")
    a = np.asarray(trace.alphas[: j + 1])
    rr = np.asarray(trace.r_norms_sq[: j + 1])
    suffix = np.cumsum((a * rr)[::-1])[::-1]
    head = np.cumsum(1.0 / rr)  # sum_{l<=i} 1/rr_l
    tail_terms = suffix**2 / rr
    tail = np.concatenate([np.cumsum(tail_terms[::-1])[::-1][1:], [0.0]])  # sum_{l>i}
    denominator = suffix**2 * head + tail
    if not np.all(denominator > 0.0):
        raise InvariantViolation("zero denominator in curvature ratio")
    return suffix / denominator


def _candidates(trace: CgTrace, eps: float, j: int) -> List[int]:
    ratios = curvature_ratios_from_scalars(trace, j)[:j]
    return [int(i) for i in np.flatnonzero(ratios < eps)]


def _find_pair(H, trace: CgTrace, eps: float, j: int):
    cands = _candidates(trace, eps, j)
    if not cands:
        raise InvariantViolation(f"residual-decay test fired at j={j} but no weak-curvature pair exists")
    y_last, hy_last = trace.y_last, trace.hy_last
    if trace.iterates is not None:
        source = ((i, trace.iterates[i], trace._hy[i]) for i in cands)
    else:
        source = _replay_states(H, trace.g, eps, cands)
    for i, y_i, hy_i in source:
        d = y_last - y_i
        hd = hy_last - hy_i
        dd = float(d @ d)
        if dd > 0.0 and float(d @ hd) + 2 * eps * dd < eps * dd:
            return i, d, hd
    raise InvariantViolation(f"no candidate pair at j={j} has curvature below eps when formed explicitly")


def _replay_states(hvp, g, eps, wanted):
    """Yield (i, y_i, H y_i) for the sorted indices in ``wanted`` by re-running CG.

    The update order matches ``run`` exactly, so the regenerated vectors are
    bitwise identical to the ones a full-storage run keeps.
    """
    n = g.shape[0]
    y = np.zeros(n)
    hy = np.zeros(n)
    r = g.copy()
    p = -g
    rr = float(r @ r)
    k = 0
    for target in wanted:
        while k < target:
            hp = hvp(p)
            hbar_p = hp + 2 * eps * p
            alpha, y, r, p, rr, _ = cg_step(y, r, p, hbar_p, rr, float(p @ hbar_p))
            hy = hy + alpha * hp
            k += 1
        yield target, y, hy


def find_nc_pair(hvp: Operator, trace: CgTrace, eps: float, j: int):
    """Locate the smallest i with weak curvature along y_{j+1} - y_i; returns ``(i, d)``."""
    if trace.y_last is None:
        raise PreconditionError("trace has no y_{j+1}; the residual-decay test did not fire")
    i, d, _ = _find_pair(hvp, trace, eps, j)
    return i, d
