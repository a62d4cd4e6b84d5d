"""Krylov kernels shared by Capped CG and the eigenvalue oracles.

``cg_step`` is the single copy of the conjugate-gradient recurrence; every CG
loop in the package (standard CG, Capped CG and its replay) goes through it so
that regenerated iterates are bitwise identical to the originals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .core import NumericalFailure, Operator

# Relative size below which a residual or Lanczos off-diagonal counts as zero.
BREAKDOWN_RTOL = 1e-14


def cg_step(y, r, p, hbar_p, rr, p_hbar_p):
    """One CG update; returns ``(alpha, y_next, r_next, p_next, rr_next, beta)``."""
    alpha = rr / p_hbar_p
    y_next = y + alpha * p
    r_next = r + alpha * hbar_p
    rr_next = float(r_next @ r_next)
    beta = rr_next / rr
    p_next = -r_next + beta * p
    if not (math.isfinite(alpha) and math.isfinite(rr_next)):
        raise NumericalFailure("non-finite CG coefficient", values=(alpha, rr_next))
    return alpha, y_next, r_next, p_next, rr_next, beta


@dataclass
class CgResult:
    """Outcome of standard CG.

    ``reason`` is ``"nonpositive"`` when ``p_j`` had nonpositive curvature,
    ``"zero_residual"`` when ``r_j`` vanished, or ``"max_iters"``.
    """

    j: int
    reason: str
    y: np.ndarray
    p: np.ndarray
    hbar_p: Optional[np.ndarray]
    curvatures: List[float] = field(default_factory=list)
    hvp_used: int = 0


def standard_cg(hbar: Operator, g, max_iters: Optional[int] = None) -> CgResult:
    """Standard CG on ``hbar y = -g``, stopping at the first p_j with p_j' hbar p_j <= 0.

    At most ``max_iters`` curvature tests (one operator application each) are
    made; the default is ``len(g)``.
    """
    g = np.asarray(g, dtype=np.float64)
    n = g.shape[0]
    if max_iters is None:
        max_iters = n
    y = np.zeros(n)
    r = g.copy()
    p = -g
    rr = float(r @ r)
    r0 = math.sqrt(rr)
    curvatures = []
    j = 0
    while True:
        if math.sqrt(rr) <= BREAKDOWN_RTOL * r0 or rr == 0.0:
            return CgResult(j, "zero_residual", y, p, None, curvatures, j)
        if j >= max_iters:
            return CgResult(j, "max_iters", y, p, None, curvatures, j)
        hp = np.asarray(hbar(p), dtype=np.float64)
        php = float(p @ hp)
        curvatures.append(php)
        if not php > 0.0:
            return CgResult(j, "nonpositive", y, p, hp, curvatures, j + 1)
        _, y, r, p, rr, _ = cg_step(y, r, p, hp, rr, php)
        j += 1


class LanczosState:
    """Lanczos process with full reorthogonalization and stored basis.

    The state can be extended in stages, which the adaptive oracle uses to
    continue one run after estimating a norm bound.
    """

    def __init__(self, hvp: Operator, b, norm_hint: float = 0.0):
        b = np.asarray(b, dtype=np.float64)
        self.n = b.shape[0]
        self._hvp = hvp
        self._norm_hint = float(norm_hint)
        self.basis: List[np.ndarray] = [b / np.linalg.norm(b)]
        self.diag: List[float] = []
        self.offdiag: List[float] = []
        self.invariant = False
        self.hvp_used = 0

    @property
    def iterations(self) -> int:
        return len(self.diag)

    def _scale(self) -> float:
        vals = [self._norm_hint] + [abs(a) for a in self.diag] + list(self.offdiag)
        return max(vals)

    def step(self):
        if self.invariant:
            return
        k = len(self.diag)
        q = self.basis[k]
        w = np.asarray(self._hvp(q), dtype=np.float64)
        self.hvp_used += 1
        alpha = float(q @ w)
        self.diag.append(alpha)
        if k + 1 == self.n:
            self.invariant = True
            return
        w = w - alpha * q
        if k > 0:
            w = w - self.offdiag[k - 1] * self.basis[k - 1]
        Q = np.array(self.basis)
        for _ in range(2):
            w = w - Q.T @ (Q @ w)
        beta = float(np.linalg.norm(w))
        if beta <= BREAKDOWN_RTOL * self._scale():
            self.invariant = True
            return
        self.offdiag.append(beta)
        self.basis.append(w / beta)

    def extend(self, total: int):
        """Run until ``total`` iterations are done or the Krylov space stops growing."""
        while self.iterations < total and not self.invariant:
            self.step()

    def ritz(self):
        """Ritz values (ascending) and the matching Ritz vectors as columns."""
        k = self.iterations
        d = np.array(self.diag)
        if k == 1:
            vals, s = d.copy(), np.ones((1, 1))
        else:
            vals, s = eigh_tridiagonal(d, np.array(self.offdiag[: k - 1]))
        Q = np.array(self.basis[:k]).T
        return vals, Q @ s

    def extreme_ritz(self):
        vals, _ = self.ritz()
        return float(vals[0]), float(vals[-1])

    def min_ritz_pair(self):
        vals, vecs = self.ritz()
        v = vecs[:, 0]
        return float(vals[0]), v / np.linalg.norm(v)
