"""Command-line front end: ``solve``, ``experiment`` and ``equiv``.

Exit codes: 0 when the solver converged or its basis process terminated,
2 for not-applicable/breakdown/max-iters outcomes, 1 for usage and IO errors.
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import oracle
from .factorizations import check_gk_lanczos_equivalence, check_ssy_lanczos_equivalence, termination_parity
from .factorizations import EquivalenceReport
from .history import ConvergenceHistory, SolverConfig
from .operators import (SKEW_TOL, LinearOperator, Structure, example_rhs, from_matrix, load_matrix_market,
                        make_conv2d_skew, make_tridiag_skew, random_rhs, read_vector, shifted)
from .shifted_solvers import s3cg_solve, s3lq_solve, s3mr_solve, usymlq_solve, usymqr_solve
from .skew_solvers import craig_solve, lsqr_solve, s2cg_solve, s2mr_solve

SKEW_ONLY = ("s2cg", "s2mr")
SHIFTED_ONLY = ("s3cg", "s3mr", "s3lq")
SOLVERS = ("s2cg", "s2mr", "craig", "lsqr", "s3cg", "s3mr", "s3lq", "usymlq", "usymqr")
CHECKS = ("gk-lanczos", "ssy-lanczos", "s2cg-craig", "s2mr-lsqr", "s3cg-craig", "s3lq-s3cg",
          "s3mr-usymqr", "s3lq-usymlq", "appendix-gk", "parity")
EQUIV_THRESHOLD = 1e-9
CSV_HEADER = "iter,residual_norm,error_norm,estimate_norm,elapsed_ns"

FIG3 = dict(m=15, sigma1=0.4, sigma2=0.6, alpha=0.8, seed=7)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# --- problem setup -----------------------------------------------------------

def build_operator(args) -> LinearOperator:
    if (args.matrix is None) == (args.gen is None):
        raise UsageError("give exactly one of --matrix and --gen")
    if args.matrix is not None:
        base = load_matrix_market(args.matrix, tol=args.skew_tol)
    elif args.gen == "tridiag":
        base = make_tridiag_skew(args.m, args.sigma)
    else:
        base = make_conv2d_skew(args.m, args.sigma1, args.sigma2)
    if args.alpha == 0.0:
        return base
    if base.is_skew:
        return shifted(args.alpha, base)
    return from_matrix(base.to_dense() + args.alpha * np.eye(base.n), Structure.GENERAL)


def build_rhs(args, n: int) -> np.ndarray:
    if args.rhs is not None:
        b = read_vector(args.rhs)
        if b.shape != (n,):
            raise UsageError(f"--rhs has {b.shape[0]} entries, the operator is {n}x{n}")
        return b
    if args.rhs_kind == "random":
        return random_rhs(n, args.seed)
    return example_rhs(args.rhs_kind, n)


def check_solver(solver: str, A: LinearOperator) -> None:
    if solver in SKEW_ONLY and not A.is_skew:
        raise UsageError(f"{solver} needs a skew-symmetric operator: use --alpha 0 with a skew matrix")
    if solver in SHIFTED_ONLY and not A.is_shifted_skew:
        raise UsageError(f"{solver} needs alpha != 0 and a skew-symmetric matrix (A = alpha*I + S)")


def reference_solution(A: LinearOperator, b: np.ndarray, ref_path=None) -> np.ndarray | None:
    """Supplied reference, else the dense pseudoinverse solution when the size permits."""
    if ref_path is not None:
        x = read_vector(ref_path)
        if x.shape != (A.n,):
            raise UsageError(f"--ref has {x.shape[0]} entries, the operator is {A.n}x{A.n}")
        return x
    if A.n <= oracle.MAX_ORACLE_N:
        return oracle.dense_pseudoinverse_solution(A.to_dense(), b)
    return None


def run_solver(solver: str, A: LinearOperator, b: np.ndarray, cfg: SolverConfig, x_ref=None) -> ConvergenceHistory:
    if solver in ("usymlq", "usymqr"):
        fn = usymlq_solve if solver == "usymlq" else usymqr_solve
        return fn(A, b, b, cfg, x_ref=x_ref)
    fn = {"s2cg": s2cg_solve, "s2mr": s2mr_solve, "craig": craig_solve, "lsqr": lsqr_solve,
          "s3cg": s3cg_solve, "s3mr": s3mr_solve, "s3lq": s3lq_solve}[solver]
    return fn(A, b, cfg, x_ref=x_ref)


# --- CSV ---------------------------------------------------------------------

def _num(v) -> str:
    return "" if v is None else repr(float(v))


def format_history(h: ConvergenceHistory, comments: list[str], timing: bool = False) -> str:
    """CSV text; floats use the shortest round-trip representation."""
    lines = [f"# {c}" for c in comments]
    lines.append(f"# solver={h.solver} outcome={h.outcome.value}")
    if h.message:
        lines.append(f"# {h.message}")
    lines.append(CSV_HEADER)
    for r in h.records:
        lines.append(f"{r.iter},{_num(r.residual_norm)},{_num(r.error_norm)},{_num(r.estimate_norm)},"
                     f"{r.elapsed_ns if timing else 0}")
    return "\n".join(lines) + "\n"


def _write(path, text: str) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# --- paired-iterate comparisons ------------------------------------------------

def _rel(x: np.ndarray, y: np.ndarray) -> float:
    ny = np.linalg.norm(y)
    return float(np.linalg.norm(x - y) / ny) if ny > 0 else float(np.linalg.norm(x))


def pair_rows(lhs: dict[int, np.ndarray], rhs: dict[int, np.ndarray], lhs_index) -> list[tuple[int, float]]:
    """Row ``j``: max relative deviation of ``lhs[i]`` from ``rhs[j]`` over ``i in lhs_index(j)``."""
    rows = []
    for j in sorted(rhs):
        devs = [_rel(lhs[i], rhs[j]) for i in lhs_index(j) if i in lhs]
        if devs:
            rows.append((j, max(devs)))
    return rows


def iterate_check(name: str, A: LinearOperator, b: np.ndarray, cfg: SolverConfig,
                  threshold: float = EQUIV_THRESHOLD) -> EquivalenceReport:
    """Run the two solvers behind check ``name`` and compare paired iterates."""
    cfg = SolverConfig(tol=cfg.tol, max_iters=cfg.max_iters, breakdown_tol=cfg.breakdown_tol,
                       reorthogonalize=cfg.reorthogonalize, keep_iterates=True)
    if name == "s2cg-craig":
        left, right = s2cg_solve(A, b, cfg), craig_solve(A, b, cfg)
        index = lambda j: (2 * j,)
    elif name == "s2mr-lsqr":
        left, right = s2mr_solve(A, b, cfg), lsqr_solve(A, b, cfg)
        index = lambda j: (2 * j, 2 * j + 1)
    elif name == "s3cg-craig":
        left, right = s3cg_solve(A, b, cfg), craig_solve(A, b, cfg)
        index = lambda j: (2 * j,)
    elif name == "s3lq-s3cg":
        left, right = s3lq_solve(A, b, cfg), s3cg_solve(A, b, cfg)
        right_map = {k: x for k, x in right.iterate_map().items() if k % 2 == 0}
        rows = pair_rows(left.iterate_map(), right_map, lambda k: (k, k + 1))
        return _report(name, rows, threshold, left, right)
    elif name == "s3mr-usymqr":
        left, right = s3mr_solve(A, b, cfg), usymqr_solve(A, b, b, cfg)
        index = lambda k: (k,)
    elif name == "s3lq-usymlq":
        left, right = s3lq_solve(A, b, cfg), usymlq_solve(A, b, b, cfg)
        index = lambda k: (k,)
    else:
        raise ValueError(f"not an iterate check: {name}")
    rows = pair_rows(left.iterate_map(), right.iterate_map(), index)
    return _report(name, rows, threshold, left, right)


def _report(name, rows, threshold, left: ConvergenceHistory, right: ConvergenceHistory) -> EquivalenceReport:
    rep = EquivalenceReport(name, rows, threshold)
    for h in (left, right):
        rep.notes.append(f"{h.solver}: {h.outcome.value} after {h.final.iter if h.records else 0} iterations")
    return rep


def _needs(check: str, A: LinearOperator) -> None:
    skew_checks = ("gk-lanczos", "ssy-lanczos", "s2cg-craig", "s2mr-lsqr", "parity")
    if check in skew_checks and not A.is_skew:
        raise UsageError(f"check {check} needs a skew-symmetric operator (--alpha 0)")
    if check not in skew_checks and not A.is_shifted_skew:
        raise UsageError(f"check {check} needs a shifted skew-symmetric operator (--alpha != 0)")


def run_check(check: str, A: LinearOperator, b: np.ndarray, cfg: SolverConfig) -> tuple[bool, str]:
    """Returns ``(passed, report text)``."""
    _needs(check, A)
    reorth = cfg.reorthogonalize
    if check == "gk-lanczos":
        steps = cfg.max_iters or A.n // 2
        rep = check_gk_lanczos_equivalence(A, b, steps, reorthogonalize=reorth, threshold=EQUIV_THRESHOLD)
        return rep.passed, rep.format()
    if check == "ssy-lanczos":
        steps = cfg.max_iters or A.n
        rep = check_ssy_lanczos_equivalence(A, b, steps, reorthogonalize=reorth, threshold=EQUIV_THRESHOLD)
        return rep.passed, rep.format()
    if check == "appendix-gk":
        rep = oracle.gk_shifted_properties_check(A, b, reorthogonalize=True, tol=EQUIV_THRESHOLD)
        if cfg.max_iters is not None:
            rep.rows = rep.rows[:cfg.max_iters]
        return rep.passed, rep.format()
    if check == "parity":
        pr = termination_parity(A, b, breakdown_tol=cfg.breakdown_tol)
        ok = pr.agrees is not False and pr.h_even_nonsingular
        text = "\n".join([
            "# check: parity",
            f"l={pr.ell}",
            f"classification={pr.classification.value}",
            f"oracle_in_range={pr.oracle_in_range}",
            f"even_sections_nonsingular={pr.h_even_nonsingular}",
            "PASS" if ok else "FAIL",
        ])
        return ok, text
    rep = iterate_check(check, A, b, cfg)
    return rep.passed, rep.format()


# --- experiments ---------------------------------------------------------------

def experiment_systems(name: str) -> tuple[LinearOperator, np.ndarray, list[str], list[str]]:
    """Operator, right-hand side, solvers and iterate checks of a named experiment."""
    if name == "fig1":
        return (make_tridiag_skew(49, 1.0), example_rhs("consistent", 49),
                ["s2cg", "craig", "s2mr", "lsqr"], ["s2cg-craig", "s2mr-lsqr"])
    if name == "fig2":
        return make_tridiag_skew(49, 1.0), example_rhs("inconsistent", 49), ["s2mr", "lsqr"], ["s2mr-lsqr"]
    if name == "fig3":
        A = shifted(FIG3["alpha"], make_conv2d_skew(FIG3["m"], FIG3["sigma1"], FIG3["sigma2"]))
        return (A, random_rhs(A.n, FIG3["seed"]), ["s3lq", "s3cg", "craig", "s3mr", "lsqr"],
                ["s3cg-craig", "s3lq-s3cg", "s3mr-usymqr", "s3lq-usymlq"])
    raise UsageError(f"unknown experiment {name!r}")


def cmd_experiment(args) -> int:
    A, b, solvers, checks = experiment_systems(args.name)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = SolverConfig(tol=args.tol, max_iters=args.maxit)
    x_ref = oracle.dense_pseudoinverse_solution(A.to_dense(), b)
    comments = [f"experiment={args.name} n={A.n} alpha={A.shift!r}"]
    if args.name == "fig3":
        comments.append(f"rhs=splitmix64 normal seed={FIG3['seed']}")
    for solver in solvers:
        h = run_solver(solver, A, b, cfg, x_ref)
        path = out / f"{args.name}_{solver}.csv"
        path.write_text(format_history(h, comments, args.timing))
        print(f"{path}: {h.outcome.value} at iter {h.final.iter}, error_norm={h.final.error_norm!r}")
    status = 0
    for check in checks:
        rep = iterate_check(check, A, b, cfg)
        path = out / f"{args.name}_{check}.csv"
        path.write_text(rep.format() + "\n")
        print(f"{path}: {'PASS' if rep.passed else 'FAIL'} max_deviation={rep.max_deviation!r}")
        status = status or (0 if rep.passed else 2)
    return status


def cmd_solve(args) -> int:
    A = build_operator(args)
    if args.solver is None:
        raise UsageError("--solver is required")
    check_solver(args.solver, A)
    b = build_rhs(args, A.n)
    cfg = SolverConfig(tol=args.tol, max_iters=args.maxit, seed=args.seed, reorthogonalize=args.reorth)
    x_ref = reference_solution(A, b, args.ref)
    h = run_solver(args.solver, A, b, cfg, x_ref)
    source = args.matrix if args.matrix else f"{args.gen} m={args.m}"
    rhs = args.rhs if args.rhs else args.rhs_kind
    comments = [f"matrix={source} n={A.n} alpha={args.alpha!r}", f"rhs={rhs} seed={args.seed}"]
    _write(args.out, format_history(h, comments, args.timing))
    if not h.outcome.ok:
        print(f"{args.solver}: {h.outcome.value}: {h.message}".rstrip(": "), file=sys.stderr)
        return 2
    return 0


def cmd_equiv(args) -> int:
    A = build_operator(args)
    b = build_rhs(args, A.n)
    cfg = SolverConfig(tol=args.tol, max_iters=args.maxit, reorthogonalize=args.reorth)
    passed, text = run_check(args.check, A, b, cfg)
    _write(args.out, text + "\n")
    return 0 if passed else 2


# --- argument parsing --------------------------------------------------------

def _positive_float(s: str) -> float:
    v = float(s)
    if not v > 0 or not math.isfinite(v):
        raise argparse.ArgumentTypeError("must be a positive number")
    return v


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _add_problem_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("problem")
    g.add_argument("--matrix", help="Matrix Market file")
    g.add_argument("--gen", choices=("tridiag", "conv2d"), help="generated skew-symmetric operator")
    g.add_argument("--m", type=_positive_int, default=49, help="generator size parameter (default 49)")
    g.add_argument("--sigma", type=float, default=1.0, help="tridiag off-diagonal value")
    g.add_argument("--sigma1", type=float, default=0.4, help="conv2d inner factor")
    g.add_argument("--sigma2", type=float, default=0.6, help="conv2d outer factor")
    g.add_argument("--alpha", type=float, default=0.0, help="shift; 0 means pure skew")
    g.add_argument("--skew-tol", type=_positive_float, default=SKEW_TOL,
                   help="relative tolerance for skew validation of --matrix input")
    g.add_argument("--rhs", help="right-hand side file, one value per line")
    g.add_argument("--rhs-kind", choices=("consistent", "inconsistent", "random"), default="consistent")
    g.add_argument("--seed", type=int, default=0, help="seed for --rhs-kind random")
    g.add_argument("--tol", type=_positive_float, default=1e-10)
    g.add_argument("--maxit", type=_positive_int, default=None, help="iteration cap (default 4n)")
    g.add_argument("--reorth", action="store_true", help="fully reorthogonalize the basis")
    g.add_argument("--out", help="output file (default stdout)")


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="skewkrylov", description="Krylov solvers for (shifted) skew-symmetric systems")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="run one solver and write its convergence history as CSV")
    _add_problem_flags(s)
    s.add_argument("--solver", choices=SOLVERS)
    s.add_argument("--ref", help="reference solution for error_norm (default: dense pseudoinverse solution)")
    s.add_argument("--timing", action="store_true", help="record elapsed_ns (otherwise 0)")
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("experiment", help="reproduce one of the fig1/fig2/fig3 experiments")
    e.add_argument("name", choices=("fig1", "fig2", "fig3"))
    e.add_argument("--out-dir", default=".", help="directory for the CSV files")
    e.add_argument("--tol", type=_positive_float, default=1e-10)
    e.add_argument("--maxit", type=_positive_int, default=None)
    e.add_argument("--timing", action="store_true")
    e.set_defaults(func=cmd_experiment)

    q = sub.add_parser("equiv", help="check an equivalence between two processes or solvers")
    _add_problem_flags(q)
    q.add_argument("--check", choices=CHECKS, required=True)
    q.set_defaults(func=cmd_equiv)
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"skewkrylov: error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"skewkrylov: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
