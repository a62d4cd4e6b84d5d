"""Minimum-eigenvalue oracles.

Each oracle either returns a unit vector ``v`` with ``v' H v = lam <= -eps/2``
or certifies ``lambda_min(H) >= -eps``; for the randomized oracles that
certificate is wrong with probability at most ``delta``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    ConfigError,
    OracleKind,
    Operator,
    PreconditionError,
    sample_unit_sphere,
)
from .krylov import BREAKDOWN_RTOL, LanczosState, standard_cg


class OutcomeKind(str, enum.Enum):
    NEGATIVE_CURVATURE = "NegativeCurvature"
    CERTIFICATE = "Certificate"


@dataclass
class OracleOutcome:
    kind: OutcomeKind
    delta_used: float
    hvp_used: int
    iterations: int
    lam: Optional[float] = None
    v: Optional[np.ndarray] = None
    # smallest curvature estimate seen, reported for certificates too
    estimate: Optional[float] = None
    m_estimate: Optional[float] = None

    @property
    def is_certificate(self) -> bool:
        return self.kind is OutcomeKind.CERTIFICATE


def _log_factor(const: float, n: int, delta: float) -> float:
    if delta == 0.0:
        return math.inf
    return 0.5 * math.log(const * n / delta**2)


def lanczos_iteration_bound(n: int, eps: float, delta: float, m: float) -> int:
    """min{n, 1 + ceil(ln(2.75 n / delta^2) sqrt(m / eps) / 2)}."""
    lf = _log_factor(2.75, n, delta)
    if math.isinf(lf):
        return n
    return min(n, 1 + math.ceil(lf * math.sqrt(m / eps)))


def adaptive_phase_one_length(n: int, delta: float) -> int:
    lf = _log_factor(25.0, n, delta)
    return n if math.isinf(lf) else min(n, 1 + math.ceil(lf))


def adaptive_total_length(n: int, eps: float, delta: float, m: float) -> int:
    lf = _log_factor(25.0, n, delta)
    return n if math.isinf(lf) else min(n, 1 + math.ceil(lf * math.sqrt(m / eps)))


def adaptive_iteration_bound(n: int, eps: float, delta: float, h_norm: float) -> int:
    """Worst-case iteration count of the adaptive oracle given the true norm of H."""
    lf = _log_factor(25.0, n, delta)
    if math.isinf(lf):
        return n
    return min(n, 1 + max(math.ceil(lf), math.ceil(lf * math.sqrt(2 * h_norm / eps))))


def _check(n, eps, delta):
    if n < 1:
        raise ConfigError("dimension must be positive")
    if not eps > 0:
        raise ConfigError("eps must be positive")
    if not 0 <= delta < 1:
        raise ConfigError("delta must lie in [0, 1)")


def _classify(state: LanczosState, eps: float, delta: float, m_estimate=None) -> OracleOutcome:
    lam, v = state.min_ritz_pair()
    common = dict(delta_used=delta, hvp_used=state.hvp_used, iterations=state.iterations,
                  estimate=lam, m_estimate=m_estimate)
    if lam <= -eps / 2:
        return OracleOutcome(OutcomeKind.NEGATIVE_CURVATURE, lam=lam, v=v, **common)
    return OracleOutcome(OutcomeKind.CERTIFICATE, **common)


def lanczos_min_eig(hvp: Operator, n: int, eps: float, delta: float, m: float,
                    rng: np.random.Generator) -> OracleOutcome:
    """Randomized Lanczos with a known bound ``m >= ||H||``."""
    _check(n, eps, delta)
    if not m > 0:
        raise ConfigError("norm bound m must be positive")
    state = LanczosState(hvp, sample_unit_sphere(n, rng), norm_hint=m)
    state.extend(lanczos_iteration_bound(n, eps, delta, m))
    return _classify(state, eps, delta)


def estimate_norm_bound(state: LanczosState, delta: float) -> float:
    """Run the first adaptive phase on ``state`` and return 2 max(|xi_max|, |xi_min|)."""
    state.extend(adaptive_phase_one_length(state.n, delta))
    lo, hi = state.extreme_ritz()
    return 2.0 * max(abs(lo), abs(hi))


def lanczos_adaptive(hvp: Operator, n: int, eps: float, delta: float,
                     rng: np.random.Generator) -> OracleOutcome:
    """Randomized Lanczos that first estimates a bound on ||H|| and then continues the same run."""
    _check(n, eps, delta)
    state = LanczosState(hvp, sample_unit_sphere(n, rng))
    m_est = estimate_norm_bound(state, delta)
    if m_est == 0.0:
        return OracleOutcome(OutcomeKind.CERTIFICATE, delta_used=delta, hvp_used=state.hvp_used,
                             iterations=state.iterations, estimate=0.0, m_estimate=0.0)
    state.extend(adaptive_total_length(n, eps, delta, m_est))
    return _classify(state, eps, delta, m_estimate=m_est)


def cg_negative_curvature_probe(hvp: Operator, n: int, eps: float, delta: float, m: float,
                                rng: np.random.Generator) -> OracleOutcome:
    """Standard CG on (H + eps/2 I) d = b with random unit b, watching for nonpositive curvature."""
    _check(n, eps, delta)
    if not m > 0:
        raise ConfigError("norm bound m must be positive")
    b = sample_unit_sphere(n, rng)
    shift = 0.5 * eps
    res = standard_cg(lambda v: hvp(v) + shift * v, -b, lanczos_iteration_bound(n, eps, delta, m))
    common = dict(delta_used=delta, hvp_used=res.hvp_used, iterations=len(res.curvatures))
    if res.reason == "nonpositive":
        p = res.p
        pp = float(p @ p)
        lam = (float(p @ res.hbar_p) - shift * pp) / pp
        return OracleOutcome(OutcomeKind.NEGATIVE_CURVATURE, lam=lam, v=p / math.sqrt(pp),
                             estimate=lam, **common)
    return OracleOutcome(OutcomeKind.CERTIFICATE, **common)


def dense_reference_eig(h_dense):
    """Exact smallest eigenpair of a symmetric matrix via LAPACK."""
    h = np.asarray(h_dense, dtype=np.float64)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise PreconditionError("matrix must be square")
    scale = max(1.0, float(np.max(np.abs(h))) if h.size else 1.0)
    if np.max(np.abs(h - h.T)) > 1e-12 * scale:
        raise PreconditionError("matrix is not symmetric")
    w, vecs = np.linalg.eigh(0.5 * (h + h.T))
    v = vecs[:, 0]
    return float(w[0]), v / np.linalg.norm(v)


def densify(hvp: Operator, n: int) -> np.ndarray:
    """Form the matrix of a linear operator column by column (n products)."""
    cols = [np.asarray(hvp(e), dtype=np.float64) for e in np.eye(n)]
    return np.column_stack(cols)


def dense_exact(hvp: Operator, n: int, eps: float) -> OracleOutcome:
    h = densify(hvp, n)
    lam, v = dense_reference_eig(h)
    common = dict(delta_used=0.0, hvp_used=n, iterations=n, estimate=lam)
    if lam <= -eps / 2:
        return OracleOutcome(OutcomeKind.NEGATIVE_CURVATURE, lam=lam, v=v, **common)
    return OracleOutcome(OutcomeKind.CERTIFICATE, **common)


def first_krylov_nonpositive_index(h_dense, b, shift: float):
    """Brute force: smallest t such that span{b, Hb, ..., H^t b} holds nonpositive curvature.

    Here H is ``h_dense + shift I``. The Krylov bases are built by explicit
    Gram-Schmidt on successive products and each projected matrix is
    diagonalized with a dense solver. Returns ``None`` when no such t exists.
    """
    hbar = np.asarray(h_dense, dtype=np.float64) + shift * np.eye(len(b))
    n = hbar.shape[0]
    b = np.asarray(b, dtype=np.float64)
    basis = [b / np.linalg.norm(b)]
    scale = np.linalg.norm(hbar, 2)
    for t in range(n):
        Q = np.column_stack(basis)
        if np.linalg.eigvalsh(Q.T @ hbar @ Q)[0] <= 0.0:
            return t
        w = hbar @ basis[-1]
        for _ in range(2):
            w = w - Q @ (Q.T @ w)
        nw = np.linalg.norm(w)
        if t + 1 == n or nw <= BREAKDOWN_RTOL * scale:
            return None
        basis.append(w / nw)
    return None


def run_oracle(kind: OracleKind, hvp: Operator, n: int, eps: float, delta: float,
               rng: np.random.Generator, m: Optional[float] = None) -> OracleOutcome:
    """Dispatch to the configured oracle.

    The known-bound oracles need ``m``; when it is missing or zero the bound is
    estimated by the first adaptive phase, whose cost is added to the outcome.
    """
    kind = OracleKind(kind)
    if kind is OracleKind.DENSE_EXACT:
        return dense_exact(hvp, n, eps)
    if kind is OracleKind.LANCZOS_ADAPTIVE:
        return lanczos_adaptive(hvp, n, eps, delta, rng)
    extra = 0
    if m is None or m <= 0.0:
        state = LanczosState(hvp, sample_unit_sphere(n, rng))
        m = estimate_norm_bound(state, delta)
        extra = state.hvp_used
        if m == 0.0:
            return OracleOutcome(OutcomeKind.CERTIFICATE, delta_used=delta, hvp_used=extra,
                                 iterations=state.iterations, estimate=0.0, m_estimate=0.0)
    if kind is OracleKind.LANCZOS_KNOWN_M:
        out = lanczos_min_eig(hvp, n, eps, delta, m, rng)
    else:
        out = cg_negative_curvature_probe(hvp, n, eps, delta, m, rng)
    out.hvp_used += extra
    out.m_estimate = m
    return out
