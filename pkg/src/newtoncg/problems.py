"""Built-in test problems with analytic gradients and Hessian-vector products.

Chained Rosenbrock, used here, couples variables only in consecutive pairs::

    f(x) = sum_i 100 (x[2i+1] - x[2i]^2)^2 + (1 - x[2i])^2

so its Hessian is block diagonal with 2x2 blocks
``[[1200 a^2 - 400 b + 2, -400 a], [-400 a, 200]]``. The third-derivative
tensor of one block has entries 2400 a and -400 (three times); on the box
|a| <= 2 its Frobenius norm, an upper bound on the Hessian's Lipschitz
constant, is sqrt(4800^2 + 3 * 400^2) < 4850.

The double well ``sum_i x_i^4/4 - x_i^2/2`` has Hessian diag(3 x_i^2 - 1) and
third derivative diag(6 x_i), giving a Lipschitz constant of 12 on the box.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.io

from .core import ConfigError, DimensionError, ObjectiveProblem, PreconditionError, make_rng

BENCHMARK_BOX = 2.0


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    n: int
    x0_default: np.ndarray
    f_low_hint: Optional[float] = None
    l_h_hint: Optional[float] = None
    known_minimizers: Optional[List[np.ndarray]] = None
    box: float = BENCHMARK_BOX


def make_rosenbrock(n: int = 2) -> Tuple[ObjectiveProblem, ProblemSpec]:
    if n < 2 or n % 2:
        raise ConfigError(f"chained Rosenbrock needs an even dimension >= 2, got {n}")

    def f(x):
        a, b = x[0::2], x[1::2]
        return float(np.sum(100.0 * (b - a**2) ** 2 + (1.0 - a) ** 2))

    def grad(x):
        a, b = x[0::2], x[1::2]
        gx = np.empty_like(x)
        gx[0::2] = -400.0 * a * (b - a**2) - 2.0 * (1.0 - a)
        gx[1::2] = 200.0 * (b - a**2)
        return gx

    def hvp(x, v):
        a, b = x[0::2], x[1::2]
        u, w = v[0::2], v[1::2]
        out = np.empty_like(v)
        out[0::2] = (1200.0 * a**2 - 400.0 * b + 2.0) * u - 400.0 * a * w
        out[1::2] = -400.0 * a * u + 200.0 * w
        return out

    x0 = np.tile([-1.2, 1.0], n // 2)
    problem = ObjectiveProblem(n=n, f=f, grad=grad, hvp=hvp, name="rosenbrock")
    spec = ProblemSpec("rosenbrock", n, x0, f_low_hint=0.0, l_h_hint=4850.0,
                       known_minimizers=[np.ones(n)])
    return problem, spec


def random_rotation(n: int, seed: int) -> np.ndarray:
    """Orthogonal matrix from the QR factorization of a seeded Gaussian matrix."""
    rng = make_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def make_quadratic_from_matrix(a, b=None, name: str = "quadratic") -> Tuple[ObjectiveProblem, ProblemSpec]:
    """f(x) = x' A x / 2 + b' x for a dense symmetric A."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise DimensionError("matrix must be square and nonempty")
    n = a.shape[0]
    if np.max(np.abs(a - a.T)) > 1e-12 * max(1.0, np.max(np.abs(a))):
        raise PreconditionError("quadratic needs a symmetric matrix")
    a = 0.5 * (a + a.T)
    b = np.zeros(n) if b is None else np.asarray(b, dtype=np.float64)
    if b.shape != (n,):
        raise DimensionError(f"linear term has shape {b.shape}, expected ({n},)")

    problem = ObjectiveProblem(
        n=n,
        f=lambda x: float(0.5 * x @ (a @ x) + b @ x),
        grad=lambda x: a @ x + b,
        hvp=lambda x, v: a @ v,
        name=name,
    )
    eigs = np.linalg.eigvalsh(a)
    f_low, minimizers = None, None
    if eigs[0] > 0:
        xstar = np.linalg.solve(a, -b)
        f_low = float(0.5 * b @ xstar)
        minimizers = [xstar]
    spec = ProblemSpec(name, n, np.zeros(n), f_low_hint=f_low, l_h_hint=0.0,
                       known_minimizers=minimizers)
    return problem, spec


def make_quadratic(eigs: Sequence[float], rotation_seed: int = 0, b=None,
                   name: str = "quadratic") -> Tuple[ObjectiveProblem, ProblemSpec]:
    """Quadratic with Hessian Q' diag(eigs) Q for a seeded random rotation Q.

    Without an explicit ``b`` the linear term is a standard normal draw from
    the same seed.
    """
    lam = np.asarray(eigs, dtype=np.float64)
    if lam.ndim != 1 or lam.size == 0:
        raise ConfigError("eigs must be a nonempty list")
    n = lam.size
    q = random_rotation(n, rotation_seed)
    a = (q.T * lam) @ q
    if b is None:
        b = make_rng(rotation_seed, 1).standard_normal(n)
    return make_quadratic_from_matrix(a, b, name=name)


def make_double_well(n: int = 1) -> Tuple[ObjectiveProblem, ProblemSpec]:
    if n < 1:
        raise ConfigError("double well needs n >= 1")
    problem = ObjectiveProblem(
        n=n,
        f=lambda x: float(np.sum(0.25 * x**4 - 0.5 * x**2)),
        grad=lambda x: x**3 - x,
        hvp=lambda x, v: (3.0 * x**2 - 1.0) * v,
        name="double-well",
    )
    spec = ProblemSpec("double-well", n, np.zeros(n), f_low_hint=-0.25 * n, l_h_hint=12.0,
                       known_minimizers=[np.ones(n), -np.ones(n)])
    return problem, spec


@dataclass
class FiniteDiffReport:
    max_grad_err: float
    max_hvp_err: float


def finite_diff_check(problem: ObjectiveProblem, x, h: float, rng: np.random.Generator,
                      directions: int = 10) -> FiniteDiffReport:
    """Compare gradient and hvp against central differences along random unit directions.

    Errors are relative, with the reference magnitude floored at one.
    """
    if not h > 0:
        raise ConfigError("finite-difference step must be positive")
    x = np.asarray(x, dtype=np.float64)
    g = problem.grad(x)
    gerr = herr = 0.0
    for _ in range(directions):
        u = rng.standard_normal(problem.n)
        u /= np.linalg.norm(u)
        fd = (problem.f(x + h * u) - problem.f(x - h * u)) / (2 * h)
        exact = float(g @ u)
        gerr = max(gerr, abs(fd - exact) / max(1.0, abs(exact)))
        fd_h = (problem.grad(x + h * u) - problem.grad(x - h * u)) / (2 * h)
        hu = problem.hvp(x, u)
        herr = max(herr, float(np.linalg.norm(fd_h - hu)) / max(1.0, float(np.linalg.norm(hu))))
    return FiniteDiffReport(gerr, herr)


# ------------------------------------------------------------------ file I/O

def load_matrix_market(path) -> np.ndarray:
    """Read a real coordinate (or array) Matrix Market file into a dense array."""
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().split()
    if len(header) != 5 or header[0].lower() != "%%matrixmarket" or header[1].lower() != "matrix":
        raise PreconditionError(f"{path}: not a Matrix Market matrix header")
    if header[3].lower() not in ("real", "integer"):
        raise PreconditionError(f"{path}: only real or integer fields are supported")
    m = scipy.io.mmread(str(path))
    dense = m.toarray() if hasattr(m, "toarray") else np.asarray(m)
    return np.asarray(dense, dtype=np.float64)


def save_matrix_market(path, a, symmetric: bool = True):
    import scipy.sparse

    scipy.io.mmwrite(str(path), scipy.sparse.coo_matrix(np.asarray(a)),
                     symmetry="symmetric" if symmetric else "general")


def load_vector(path) -> np.ndarray:
    return np.atleast_1d(np.loadtxt(str(path), dtype=np.float64)).ravel()


def make_quadratic_from_files(matrix_path, rhs_path=None):
    a = load_matrix_market(matrix_path)
    b = None if rhs_path is None else load_vector(rhs_path)
    return make_quadratic_from_matrix(a, b, name="quadratic-file")


# ----------------------------------------------------------------- registry

def build_problem(name: str, n: Optional[int] = None, seed: int = 0,
                  matrix: Optional[str] = None, rhs: Optional[str] = None):
    """Look up a named benchmark; raises ``KeyError`` for unknown names."""
    if name == "rosenbrock":
        return make_rosenbrock(n or 2)
    if name == "double-well":
        return make_double_well(n or 1)
    if name == "quadratic-spd":
        k = n or 10
        return make_quadratic(np.linspace(1.0, 10.0, k), seed, name=name)
    if name == "quadratic-indefinite":
        k = n or 10
        return make_quadratic(np.linspace(-1.0, 10.0, k), seed, name=name)
    if name == "quadratic-file":
        if matrix is None:
            raise ConfigError("quadratic-file needs a matrix file")
        return make_quadratic_from_files(matrix, rhs)
    raise KeyError(name)


PROBLEM_NAMES = ("rosenbrock", "double-well", "quadratic-spd", "quadratic-indefinite", "quadratic-file")
