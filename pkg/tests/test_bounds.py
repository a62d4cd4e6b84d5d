import math

import pytest

from newtoncg.bounds import c_nc, c_sol, compute_bounds, j_nc, j_sol, k_bar_1, k_bar_2, n_meo
from newtoncg.core import ConfigError, SolverConfig


def test_c_nc_quadratic_case():
    assert c_nc(0.0, 0.1, 0.5) == pytest.approx(0.1 / 6)
    # with a large L_H the second branch is active
    assert c_nc(100.0, 0.1, 0.5) == pytest.approx(0.1 / 6 * 27 * 0.125 / 100.1**3)


def test_c_sol_frozen_value():
    # L_H = 0, zeta = 0.5: first branch (4 / 9)^3, second (3 * 0.25 * 0.5 / 0.1)^3
    assert c_sol(0.0, 0.1, 0.5, 0.5) == pytest.approx(0.1 / 6 * (4 / 9) ** 3)


def test_backtrack_bounds():
    assert j_nc(0.0, 0.1, 0.5) == 0
    assert j_nc(100.0, 0.1, 0.5) == math.floor(math.log(3 / 100.1) / math.log(0.5))
    assert j_sol(0.0, 0.1, 0.5, 0.5, 0.5, 1.0) == 0
    expected = 0.5 * math.log(3 * 0.5 / 10.1 * 1e-4 / 1.1) / math.log(0.5)
    assert j_sol(10.0, 0.1, 0.5, 0.5, 1e-2, 1.0) == math.floor(expected)


def test_k_bar_balanced_tolerances():
    eps_g = 1e-4
    eps_h = math.sqrt(eps_g)
    # both arguments of the max equal eps_g^(-3/2)
    assert eps_g**-3 * eps_h**3 == pytest.approx(eps_h**-3)
    k1 = k_bar_1(1.0, 0.0, 0.01, 0.02, eps_g, eps_h)
    assert k1 == math.ceil(1.0 / 0.01 * eps_g**-1.5)
    assert k_bar_2(1.0, 0.0, 0.01, 0.02, eps_g, eps_h) == math.ceil(3 / 0.0025 * eps_g**-1.5) + 2


def test_n_meo_caps_at_dimension():
    assert n_meo(5, 1e-4, 0.1, 100.0) == 5
    assert n_meo(10**6, 0.25, 0.1, 1.0) == 1 + math.ceil(math.log(2.75e6 / 0.01) / 2 * 2)


def test_rosenbrock_report_is_finite():
    cfg = SolverConfig(eps_g=1e-5, eps_h=1e-2)
    rep = compute_bounds(4850.0, 2600.0, 24.2, 0.0, cfg, 2, u_g=250.0)
    assert rep.j_cap == 2 and rep.n_meo == 2
    for v in rep.as_dict().values():
        assert math.isfinite(v)
    assert rep.k_bar_2 > rep.k_bar_1 > 0


def test_missing_gradient_bound():
    rep = compute_bounds(1.0, 1.0, 1.0, 0.0, SolverConfig(eps_g=1e-3, eps_h=0.1), 4)
    assert rep.j_sol is None


@pytest.mark.parametrize("args", [(-1.0, 1.0, 1.0, 0.0), (1.0, 0.0, 1.0, 0.0), (1.0, 1.0, 0.0, 1.0)])
def test_invalid_inputs(args):
    with pytest.raises(ConfigError):
        compute_bounds(*args, SolverConfig(eps_g=1e-3, eps_h=0.1), 3)


def test_j_sol_needs_positive_gradient_bound():
    with pytest.raises(ConfigError):
        j_sol(0.0, 0.1, 0.5, 0.5, 0.01, 0.0)
