"""Command-line entry point: ``solve``, ``calibrate`` and ``bounds`` subcommands.

Usage errors exit with status 64. ``solve`` maps the solver status to
0 (second-order point), 2 (iteration limit), 3 (line search) and 4 (numerical).
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import bounds as bounds_mod
from .bounds import compute_bounds
from .core import (
    ConfigError,
    DimensionError,
    NewtonCGError,
    OracleKind,
    SolverConfig,
    StoragePolicy,
    dense_operator,
    make_rng,
)
from .eig_oracle import (
    adaptive_iteration_bound,
    lanczos_iteration_bound,
    run_oracle,
)
from .newton_cg import Status, solve
from .problems import PROBLEM_NAMES, build_problem, random_rotation

EXIT_USAGE = 64
EXIT_CODES = {
    Status.SECOND_ORDER_POINT: 0,
    Status.MAX_ITERS: 2,
    Status.LINE_SEARCH_FAIL: 3,
    Status.NUMERICAL_FAIL: 4,
}
SUMMARY_HEADER = (
    "problem", "n", "status", "outer_iterations", "f_final", "grad_norm_final",
    "hvp_count", "grad_count", "f_count", "certificate_delta", "seed",
)
BOUNDS_COLUMNS = ("c_sol", "c_nc", "j_sol", "j_nc", "k_bar_1", "k_bar_2", "j_cap", "n_meo")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> List[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")


def _add_solver_flags(p):
    p.add_argument("--eps-g", type=float, default=1e-5)
    p.add_argument("--eps-h", type=float, default=1e-2)
    p.add_argument("--theta", type=float, default=0.5)
    p.add_argument("--zeta", type=float, default=0.5)
    p.add_argument("--eta", type=float, default=0.1)
    p.add_argument("--delta", type=float, default=0.05)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="newtoncg", description="Damped Newton-CG solver and analysis tools")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="run the solver on a built-in problem")
    s.add_argument("--config", help="file of key=value defaults, overridden by flags")
    s.add_argument("--problem", required=True, choices=PROBLEM_NAMES)
    s.add_argument("--n", type=int)
    s.add_argument("--x0", default="default", help="comma-separated start point or 'default'")
    s.add_argument("--matrix", help="Matrix Market file for quadratic-file")
    s.add_argument("--rhs", help="text vector file for quadratic-file")
    _add_solver_flags(s)
    s.add_argument("--oracle", choices=[k.value for k in OracleKind],
                   default=OracleKind.LANCZOS_ADAPTIVE.value)
    s.add_argument("--storage", choices=[k.value for k in StoragePolicy],
                   default=StoragePolicy.SCALARS_ONLY.value)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-iters", type=int, default=1000)
    s.add_argument("--max-ls", type=int, default=60)
    s.add_argument("--trace", help="write one JSON record per step to this file")
    s.add_argument("--summary", help="write a one-row CSV summary to this file")
    s.add_argument("--check-bounds", action="store_true",
                   help="audit per-step decrease with the problem's Hessian Lipschitz hint")

    c = sub.add_parser("calibrate", help="measure an eigenvalue oracle's false-certificate rate")
    c.add_argument("--trials", type=int, required=True)
    c.add_argument("--delta", type=float, default=0.05)
    c.add_argument("--eps", type=float, default=1.0)
    c.add_argument("--spectrum", type=_float_list, required=True)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--oracle", choices=[k.value for k in OracleKind if k is not OracleKind.DENSE_EXACT],
                   default=OracleKind.LANCZOS_KNOWN_M.value)

    b = sub.add_parser("bounds", help="evaluate the analytic constants and iteration bounds")
    b.add_argument("--l-h", type=float, required=True)
    b.add_argument("--u-h", type=float, required=True)
    b.add_argument("--u-g", type=float)
    b.add_argument("--f0", type=float, required=True)
    b.add_argument("--f-low", type=float, required=True)
    b.add_argument("--n", type=int, required=True)
    _add_solver_flags(b)
    b.add_argument("--csv", help="also write the report as CSV")
    return parser


def _read_config(path: str) -> Dict[str, str]:
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (t.strip() for t in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def _apply_config(sub: argparse.ArgumentParser, path: str):
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, raw in _read_config(path).items():
        action = actions.get(key)
        if action is None or key in ("config", "help"):
            raise UsageError(f"{path}: unknown key {key!r}")
        if isinstance(action, argparse._StoreTrueAction):
            defaults[key] = raw.lower() in ("1", "true", "yes", "on")
            continue
        value = action.type(raw) if action.type else raw
        if action.choices is not None and value not in action.choices:
            raise UsageError(f"{path}: invalid value {raw!r} for {key}")
        defaults[key] = value
        # a config value satisfies a required flag
        action.required = False
    sub.set_defaults(**defaults)


def _join_negative_lists(argv: List[str]) -> List[str]:
    # argparse takes "--spectrum -2,1,3" for two options; glue such values to their flag
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        nxt = argv[i + 1] if i + 1 < len(argv) else ""
        if tok in ("--spectrum", "--x0") and len(nxt) > 1 and nxt[0] == "-" and (nxt[1].isdigit() or nxt[1] == "."):
            out.append(f"{tok}={nxt}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def parse_args(argv: Optional[Sequence[str]]):
    parser = build_parser()
    argv = _join_negative_lists(list(sys.argv[1:] if argv is None else argv))
    if argv and argv[0] == "solve" and "--config" in argv[1:]:
        pre = argparse.ArgumentParser(add_help=False)
        pre.add_argument("--config")
        known, _ = pre.parse_known_args(argv[1:])
        if known.config:
            solve_parser = parser._subparsers._group_actions[0].choices["solve"]
            _apply_config(solve_parser, known.config)
    return parser.parse_args(argv)


# ------------------------------------------------------------------ solve

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def cmd_solve(args) -> int:
    try:
        problem, spec = build_problem(args.problem, args.n, args.seed, args.matrix, args.rhs)
    except (ConfigError, DimensionError, OSError, ValueError) as exc:
        raise UsageError(str(exc))
    if args.x0 == "default":
        x0 = spec.x0_default
    else:
        x0 = np.asarray(_float_list(args.x0))
        if x0.shape != (problem.n,):
            raise UsageError(f"--x0 has {x0.size} entries, problem dimension is {problem.n}")
    try:
        config = SolverConfig(
            eps_g=args.eps_g, eps_h=args.eps_h, theta=args.theta, zeta=args.zeta, eta=args.eta,
            delta=args.delta, max_outer_iters=args.max_iters, max_ls_iters=args.max_ls,
            rng_seed=args.seed, oracle_kind=args.oracle, storage=args.storage,
        )
    except ConfigError as exc:
        raise UsageError(str(exc))
    l_h = None
    if args.check_bounds:
        if spec.l_h_hint is None:
            raise UsageError(f"problem {spec.name} has no Hessian Lipschitz hint for --check-bounds")
        l_h = spec.l_h_hint

    report = solve(problem, x0, config, l_h=l_h)

    if args.trace:
        with open(args.trace, "w") as fh:
            for rec in report.trace:
                fh.write(json.dumps(rec.as_dict()) + "\n")
    row = dict(
        problem=spec.name, n=problem.n, status=report.status.value,
        outer_iterations=report.outer_iterations, f_final=report.f_final,
        grad_norm_final=report.grad_norm_final, hvp_count=report.counters.hvp_count,
        grad_count=report.counters.grad_count, f_count=report.counters.f_count,
        certificate_delta=report.certificate_delta, seed=args.seed,
    )
    if args.summary:
        with open(args.summary, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SUMMARY_HEADER)
            w.writerow([_fmt(row[k]) for k in SUMMARY_HEADER])

    print(f"status: {report.status.value}")
    print(f"outer iterations: {report.outer_iterations}")
    print(f"f_final: {report.f_final!r}")
    print(f"grad_norm_final: {report.grad_norm_final!r}")
    print(f"x_final: {np.array2string(report.x_final, precision=8)}")
    print("counters: " + " ".join(f"{k}={v}" for k, v in report.counters.as_dict().items()))
    if report.message:
        print(f"note: {report.message}")
    if args.check_bounds:
        audited = [r.decrease_bound_ok for r in report.trace if r.decrease_bound_ok is not None]
        print(f"decrease audits: {sum(audited)}/{len(audited)} passed")
        if spec.f_low_hint is not None:
            cs = bounds_mod.c_sol(l_h, config.eta, config.zeta, config.theta)
            cn = bounds_mod.c_nc(l_h, config.eta, config.theta)
            k2 = bounds_mod.k_bar_2(problem.f(x0), spec.f_low_hint, cs, cn, config.eps_g, config.eps_h)
            print(f"outer iterations {report.outer_iterations} <= K2 {k2}: "
                  f"{report.outer_iterations <= k2}")
    return EXIT_CODES[report.status]


# -------------------------------------------------------------- calibrate

@dataclass
class CalibrationResult:
    trials: int
    failures: int
    certificates: int
    bad_witnesses: int
    iteration_bound: int
    over_bound: int
    histogram: Dict[int, int] = field(default_factory=dict)

    @property
    def failure_rate(self) -> float:
        return self.failures / self.trials

    def threshold(self, delta: float) -> float:
        return delta + 3.0 * math.sqrt(delta * (1.0 - delta) / self.trials)


def run_calibration(spectrum: Sequence[float], eps: float, delta: float, trials: int, seed: int,
                    kind: OracleKind) -> CalibrationResult:
    """Run an oracle on Q' diag(spectrum) Q for independent seeds (seed, t), t < trials.

    A failure is a certificate issued although lambda_min < -eps. NC witnesses
    are checked for unit norm and curvature at most -eps/2.
    """
    lam = np.asarray(spectrum, dtype=np.float64)
    n = lam.size
    q = random_rotation(n, seed)
    h = (q.T * lam) @ q
    op = dense_operator(h)
    h_norm = float(np.max(np.abs(lam)))
    kind = OracleKind(kind)
    if kind is OracleKind.LANCZOS_ADAPTIVE:
        bound = adaptive_iteration_bound(n, eps, delta, h_norm)
    else:
        bound = lanczos_iteration_bound(n, eps, delta, h_norm)
    lam_min = float(lam.min())
    res = CalibrationResult(trials, 0, 0, 0, bound, 0)
    hist: Counter = Counter()
    for t in range(trials):
        out = run_oracle(kind, op, n, eps, delta, make_rng(seed, t), m=h_norm)
        hist[out.iterations] += 1
        if out.iterations > bound:
            res.over_bound += 1
        if out.is_certificate:
            res.certificates += 1
            if lam_min < -eps:
                res.failures += 1
        else:
            v = out.v
            if abs(np.linalg.norm(v) - 1.0) > 1e-10 or float(v @ (h @ v)) > -eps / 2 + 1e-8:
                res.bad_witnesses += 1
    res.histogram = dict(sorted(hist.items()))
    return res


def cmd_calibrate(args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be positive")
    if not args.spectrum:
        raise UsageError("--spectrum must list at least one eigenvalue")
    if not args.eps > 0 or not 0 < args.delta < 1:
        raise UsageError("--eps must be positive and --delta in (0, 1)")
    res = run_calibration(args.spectrum, args.eps, args.delta, args.trials, args.seed,
                          OracleKind(args.oracle))
    limit = res.threshold(args.delta)
    ok = res.failure_rate <= limit and res.bad_witnesses == 0 and res.over_bound == 0
    print(f"oracle: {args.oracle}  n: {len(args.spectrum)}  trials: {res.trials}")
    print(f"certificate rate: {res.certificates / res.trials:.4f}")
    print(f"false-certificate rate: {res.failure_rate:.4f} (limit {limit:.4f})")
    print(f"invalid witnesses: {res.bad_witnesses}")
    print(f"iteration bound: {res.iteration_bound}  runs over bound: {res.over_bound}")
    print("iteration histogram:")
    for it, count in res.histogram.items():
        print(f"  {it:6d} {count:8d}")
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


# ----------------------------------------------------------------- bounds

def cmd_bounds(args) -> int:
    try:
        config = SolverConfig(eps_g=args.eps_g, eps_h=args.eps_h, theta=args.theta, zeta=args.zeta,
                              eta=args.eta, delta=args.delta)
        rep = compute_bounds(args.l_h, args.u_h, args.f0, args.f_low, config, args.n, u_g=args.u_g)
    except ConfigError as exc:
        raise UsageError(str(exc))
    values = rep.as_dict()
    width = max(len(k) for k in BOUNDS_COLUMNS)
    for key in BOUNDS_COLUMNS:
        v = values[key]
        text = "n/a" if v is None else (f"{v:.10g}" if isinstance(v, float) else str(v))
        print(f"{key:<{width}}  {text:>24}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(BOUNDS_COLUMNS)
            w.writerow([_fmt(values[k]) for k in BOUNDS_COLUMNS])
    return 0


COMMANDS = {"solve": cmd_solve, "calibrate": cmd_calibrate, "bounds": cmd_bounds}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        # argparse exits on --help (0) and on usage errors (64)
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except (UsageError, OSError) as exc:
        print(f"newtoncg: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"newtoncg: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, NewtonCGError) as exc:
        print(f"newtoncg: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
