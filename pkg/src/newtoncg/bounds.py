"""Closed-form decrease constants and worst-case iteration bounds.

Nothing here runs the solver; these are the quantities a run is audited
against (per-step decrease, backtracking counts, outer-iteration totals).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

from .capped_cg import iteration_cap
from .core import ConfigError, SolverConfig


def c_sol(l_h: float, eta: float, zeta: float, theta: float) -> float:
    first = (4.0 / (math.sqrt((4.0 + zeta) ** 2 + 8.0 * l_h) + 4.0 + zeta)) ** 3
    second = (3.0 * theta**2 * (1.0 - zeta) / (l_h + eta)) ** 3
    return eta / 6.0 * min(first, second)


def c_nc(l_h: float, eta: float, theta: float) -> float:
    return eta / 6.0 * min(1.0, 27.0 * theta**3 / (l_h + eta) ** 3)


def _positive_floor_log(value: float, theta: float) -> int:
    # [log_theta(value)]_+ as the integer part; j <= floor(x) + 1 iff j <= x + 1
    return max(0, math.floor(math.log(value) / math.log(theta)))


def j_sol(l_h: float, eta: float, zeta: float, theta: float, eps_h: float, u_g: float) -> int:
    if not u_g > 0:
        raise ConfigError("u_g must be positive")
    arg = 3.0 * (1.0 - zeta) / (l_h + eta) * eps_h**2 / (1.1 * u_g)
    return max(0, math.floor(0.5 * math.log(arg) / math.log(theta)))


def j_nc(l_h: float, eta: float, theta: float) -> int:
    return _positive_floor_log(3.0 / (l_h + eta), theta)


def _growth(eps_g: float, eps_h: float) -> float:
    return max(eps_g**-3 * eps_h**3, eps_h**-3)


def k_bar_1(f0, f_low, csol, cnc, eps_g, eps_h) -> int:
    return math.ceil((f0 - f_low) / min(csol, cnc) * _growth(eps_g, eps_h))


def k_bar_2(f0, f_low, csol, cnc, eps_g, eps_h) -> int:
    return math.ceil(3.0 * (f0 - f_low) / min(csol, cnc / 8.0) * _growth(eps_g, eps_h)) + 2


def n_meo(n: int, eps_h: float, delta: float, u_h: float) -> int:
    if delta == 0.0:
        return n
    c_meo = math.log(2.75 * n / delta**2) * math.sqrt(u_h) / 2.0
    return min(n, 1 + math.ceil(c_meo * eps_h**-0.5))


@dataclass(frozen=True)
class BoundsReport:
    c_sol: float
    c_nc: float
    j_sol: Optional[int]
    j_nc: int
    k_bar_1: int
    k_bar_2: int
    j_cap: int
    n_meo: int

    def as_dict(self) -> dict:
        return asdict(self)


def compute_bounds(l_h: float, u_h: float, f0: float, f_low: float, config: SolverConfig,
                   n: int, u_g: Optional[float] = None) -> BoundsReport:
    """Evaluate every bound for the given problem constants.

    ``j_sol`` depends on the gradient bound ``u_g`` and is ``None`` without it.
    """
    if not l_h >= 0:
        raise ConfigError("l_h must be nonnegative")
    if not u_h > 0:
        raise ConfigError("u_h must be positive")
    if not f0 >= f_low:
        raise ConfigError("f0 must be at least f_low")
    if n < 1:
        raise ConfigError("n must be positive")
    if u_g is not None and not u_g > 0:
        raise ConfigError("u_g must be positive")
    cs = c_sol(l_h, config.eta, config.zeta, config.theta)
    cn = c_nc(l_h, config.eta, config.theta)
    return BoundsReport(
        c_sol=cs,
        c_nc=cn,
        j_sol=None if u_g is None else j_sol(l_h, config.eta, config.zeta, config.theta, config.eps_h, u_g),
        j_nc=j_nc(l_h, config.eta, config.theta),
        k_bar_1=k_bar_1(f0, f_low, cs, cn, config.eps_g, config.eps_h),
        k_bar_2=k_bar_2(f0, f_low, cs, cn, config.eps_g, config.eps_h),
        j_cap=iteration_cap(u_h, config.eps_h, config.zeta, n),
        n_meo=n_meo(n, config.eps_h, config.delta, u_h),
    )
