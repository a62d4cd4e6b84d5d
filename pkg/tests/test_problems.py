import numpy as np
import pytest

from newtoncg.core import ConfigError, DimensionError, PreconditionError, make_rng
from newtoncg.eig_oracle import densify
from newtoncg.problems import (
    build_problem,
    finite_diff_check,
    load_matrix_market,
    load_vector,
    make_double_well,
    make_quadratic,
    make_quadratic_from_files,
    make_rosenbrock,
    save_matrix_market,
)


def test_rosenbrock_values():
    p, spec = make_rosenbrock(2)
    assert p.f(np.array([-1.2, 1.0])) == pytest.approx(24.2, rel=1e-14)
    assert p.f(np.ones(2)) == 0.0
    assert np.array_equal(p.grad(np.ones(2)), np.zeros(2))
    assert spec.l_h_hint == 4850.0 and spec.f_low_hint == 0.0


def test_rosenbrock_rejects_odd_dimension():
    with pytest.raises(ConfigError):
        make_rosenbrock(3)


def test_rosenbrock_hessian_at_minimizer_is_positive_definite():
    p, _ = make_rosenbrock(4)
    h = densify(lambda v: p.hvp(np.ones(4), v), 4)
    assert np.allclose(h, h.T)
    assert np.linalg.eigvalsh(h)[0] > 0


def test_quadratic_spectrum_preserved():
    eigs = [-1.5, 0.2, 3.0, 7.0]
    p, spec = make_quadratic(eigs, rotation_seed=3)
    h = densify(lambda v: p.hvp(np.zeros(4), v), 4)
    assert np.allclose(np.linalg.eigvalsh(h), eigs, atol=1e-12)
    assert spec.f_low_hint is None


def test_identity_quadratic():
    b = np.array([1.0, -2.0, 0.5])
    p, spec = make_quadratic([1.0, 1.0, 1.0], 0, b=b)
    x = np.array([0.3, 0.1, -0.7])
    assert p.f(x) == pytest.approx(0.5 * x @ x + b @ x, rel=1e-12)
    assert spec.f_low_hint == pytest.approx(-0.5 * b @ b)


def test_quadratic_hvp_constant_in_x():
    p, _ = make_quadratic(np.linspace(1, 4, 6), 1)
    v = make_rng(0).standard_normal(6)
    assert np.array_equal(p.hvp(np.zeros(6), v), p.hvp(np.full(6, 3.0), v))


def test_double_well():
    p, spec = make_double_well(3)
    assert np.array_equal(p.grad(np.zeros(3)), np.zeros(3))
    assert np.array_equal(p.hvp(np.zeros(3), np.ones(3)), -np.ones(3))
    assert p.f(np.ones(3)) == pytest.approx(-0.75)
    assert spec.f_low_hint == -0.75


@pytest.mark.parametrize("name,n", [("rosenbrock", 2), ("rosenbrock", 6), ("double-well", 5),
                                    ("quadratic-spd", 8), ("quadratic-indefinite", 8)])
def test_registered_problems_pass_finite_differences(name, n):
    p, spec = build_problem(name, n, seed=2)
    rng = make_rng(11)
    quadratic = name.startswith("quadratic")
    for _ in range(5):
        x = rng.uniform(-spec.box, spec.box, n)
        h = 1e-5 if quadratic else 1e-6 * max(1.0, np.linalg.norm(x))
        rep = finite_diff_check(p, x, h, rng)
        tol = 1e-7 if quadratic else 1e-5
        assert rep.max_grad_err <= tol and rep.max_hvp_err <= tol


def test_finite_difference_error_shrinks_or_floors():
    p, _ = make_rosenbrock(2)
    x = np.array([-1.2, 1.0])
    e4 = finite_diff_check(p, x, 1e-4, make_rng(5)).max_hvp_err
    e5 = finite_diff_check(p, x, 1e-5, make_rng(5)).max_hvp_err
    assert e5 <= e4 or e5 < 1e-9


def test_finite_difference_rejects_bad_step():
    p, _ = make_double_well(1)
    with pytest.raises(ConfigError):
        finite_diff_check(p, np.zeros(1), 0.0, make_rng(0))


def test_symmetric_hvp_on_random_points():
    p, _ = make_rosenbrock(4)
    rng = make_rng(9)
    for _ in range(5):
        x, u, w = rng.uniform(-2, 2, (3, 4))
        lhs, rhs = u @ p.hvp(x, w), w @ p.hvp(x, u)
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))
        combo = p.hvp(x, 2 * u - 3 * w)
        assert np.allclose(combo, 2 * p.hvp(x, u) - 3 * p.hvp(x, w), rtol=1e-10, atol=1e-10)


def test_matrix_market_round_trip(tmp_path):
    a = np.array([[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]])
    path = tmp_path / "a.mtx"
    save_matrix_market(path, a)
    assert path.read_text().startswith("%%MatrixMarket matrix coordinate real symmetric")
    assert np.array_equal(load_matrix_market(path), a)
    (tmp_path / "b.txt").write_text("1\n0\n-1\n")
    assert np.array_equal(load_vector(tmp_path / "b.txt"), [1.0, 0.0, -1.0])
    p, spec = make_quadratic_from_files(path, tmp_path / "b.txt")
    assert spec.known_minimizers is not None
    assert np.allclose(p.grad(spec.known_minimizers[0]), 0, atol=1e-12)


def test_matrix_market_one_based_indices(tmp_path):
    path = tmp_path / "m.mtx"
    path.write_text("%%MatrixMarket matrix coordinate real general\n% comment\n2 2 2\n1 2 5.0\n2 1 5.0\n")
    assert np.array_equal(load_matrix_market(path), [[0.0, 5.0], [5.0, 0.0]])


def test_matrix_market_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.mtx"
    path.write_text("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1.0 0.0\n")
    with pytest.raises(PreconditionError):
        load_matrix_market(path)
    path.write_text("1 1 1\n1 1 1.0\n")
    with pytest.raises(PreconditionError):
        load_matrix_market(path)


def test_quadratic_file_rejects_asymmetric(tmp_path):
    path = tmp_path / "n.mtx"
    path.write_text("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 2 1.0\n")
    with pytest.raises(PreconditionError):
        make_quadratic_from_files(path)
    (tmp_path / "b.txt").write_text("1 2 3\n")
    save_matrix_market(tmp_path / "s.mtx", np.eye(2))
    with pytest.raises(DimensionError):
        make_quadratic_from_files(tmp_path / "s.mtx", tmp_path / "b.txt")


def test_unknown_problem():
    with pytest.raises(KeyError):
        build_problem("beale")
