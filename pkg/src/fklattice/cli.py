"""Command-line front end.

Subcommands ``price``, ``surface``, ``convergence``, ``mc`` and ``validate``
read a problem from ``--config FILE`` or ``--preset NAME``.  Summaries go to
standard output as JSON, diagnostics to standard error.

Exit codes: 0 success, 1 configuration or usage error, 2 validation failure,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time

from .autodiff import DomainError
from .config import ConfigError, ProblemConfig, load_config, preset
from .engine import DEFAULT_N_LIST, convergence_study, price_problem, surface_problem
from .grid import GridTooCoarse
from .kernel import NumericalError
from .model import validate_problem
from .oracle import MIN_PATHS, MIN_STEPS, mc_price

EXIT_CONFIG, EXIT_INVALID, EXIT_NUMERIC = 1, 2, 3


class _Exit(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def fmt(value: float) -> str:
    """Fixed 17-significant-digit rendering; parsing and re-rendering is byte-identical."""
    return format(float(value), ".17g")


def _write_csv(path, header, rows) -> None:
    try:
        fh = sys.stdout if path in (None, "-") else open(path, "w", newline="")
    except OSError as exc:
        raise _Exit(EXIT_CONFIG, f"cannot write {path}: {exc}") from None
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows([fmt(v) if isinstance(v, float) else v for v in row] for row in rows)
    finally:
        if fh is not sys.stdout:
            fh.close()


def _emit(obj) -> None:
    print(json.dumps(obj))


def _load(args) -> ProblemConfig:
    cfg = load_config(args.config) if args.config else preset(args.preset)
    return cfg.with_overrides(n=args.n, quad_order=args.quad_order, kappa=args.kappa)


def _validated(cfg: ProblemConfig):
    problem = cfg.problem()
    violations = validate_problem(problem.model, problem.bounds, cfg.params())
    if violations:
        raise _Exit(EXIT_INVALID, "invalid problem: " + "; ".join(violations))
    return problem


def cmd_validate(args) -> int:
    cfg = _load(args)
    problem = cfg.problem()
    violations = validate_problem(problem.model, problem.bounds, cfg.params())
    if args.json:
        _emit({"valid": not violations, "violations": violations})
    else:
        for v in violations:
            print(v)
        if not violations:
            print("valid")
    return EXIT_INVALID if violations else 0


def cmd_price(args) -> int:
    cfg = _load(args)
    problem = _validated(cfg)
    result = price_problem(problem, cfg.n)
    sizes = result.layer_sizes
    _emit({
        "n": result.n,
        "q_re": result.q.real,
        "q_im": result.q.imag,
        "runtime_ms": 1000.0 * result.wall_time,
        "grid": {"layers": result.layer_count, "min_nodes": min(sizes[1:]),
                 "max_nodes": max(sizes[1:]), "total_nodes": sum(sizes)},
    })
    return 0


def cmd_surface(args) -> int:
    cfg = _load(args)
    problem = _validated(cfg)
    surface = surface_problem(problem, cfg.n)
    rows = [(t, x, v.real, v.imag) for t, x, v in surface.rows()]
    _write_csv(args.out, ["t", "x", "re_v", "im_v"], rows)
    if args.out not in (None, "-"):
        _emit({"n": cfg.n, "rows": len(rows), "q_re": surface.q.real, "q_im": surface.q.imag,
               "out": args.out})
    return 0


def _parse_n_list(text):
    if text is None:
        return list(DEFAULT_N_LIST)
    try:
        n_list = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise _Exit(EXIT_CONFIG, f"bad --n-list {text!r}") from None
    if len(n_list) < 4 or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise _Exit(EXIT_CONFIG, "--n-list needs at least 4 increasing values")
    return n_list


def cmd_convergence(args) -> int:
    cfg = _load(args)
    problem = _validated(cfg)
    n_list = _parse_n_list(args.n_list)
    study = convergence_study(problem, n_list)
    rows = [(int(n), q.real, q.imag, d) for n, q, d in zip(study.n, study.q, study.diff)]
    summary = {"slope": study.slope, "intercept": study.intercept, "r2": study.r2,
               "degenerate": study.degenerate}
    if args.out not in (None, "-"):
        _write_csv(args.out, ["n", "q_re", "q_im", "diff_abs"], rows)
    if args.json or args.out in (None, "-"):
        summary["rows"] = [{"n": n, "q_re": a, "q_im": b, "diff_abs": d} for n, a, b, d in rows]
    _emit({k: (None if isinstance(v, float) and v != v else v) for k, v in summary.items()})
    return 0


def cmd_mc(args) -> int:
    cfg = _load(args)
    problem = _validated(cfg)
    if args.paths < MIN_PATHS or args.steps < MIN_STEPS:
        raise _Exit(EXIT_INVALID, f"need paths >= {MIN_PATHS} and steps >= {MIN_STEPS}")
    start = time.perf_counter()
    est = mc_price(problem.model, problem.bounds, problem.potential, problem.payoff,
                   args.steps, args.paths, args.seed, quad_order=problem.quad_order)
    mc_ms = 1000.0 * (time.perf_counter() - start)
    engine = price_problem(problem, cfg.n).q
    _emit({
        "mean_re": est.mean.real, "mean_im": est.mean.imag,
        "se": est.std_error[0], "se_im": est.std_error[1],
        "paths": est.paths, "steps": est.steps_per_path, "seed": est.seed,
        "n": cfg.n, "engine_re": engine.real, "engine_im": engine.imag,
        "z_score": est.z_score(engine),
        **({"runtime_ms": mc_ms} if args.timing else {}),
    })
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", metavar="PATH", help="YAML/JSON problem file")
    src.add_argument("--preset", help="example1, example2, example3, bcp or kac")
    common.add_argument("--n", type=int, help="override the number of time steps")
    common.add_argument("--quad-order", type=int, help="Gauss-Legendre order for step potentials")
    common.add_argument("--kappa", type=float, help="override the step potential's rate")
    common.add_argument("--json", action="store_true", help="emit full results as JSON")

    parser = _Parser(prog="fklattice", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("validate", parents=[common], help="check the problem").set_defaults(func=cmd_validate)
    sub.add_parser("price", parents=[common], help="compute Q_n").set_defaults(func=cmd_price)

    p = sub.add_parser("surface", parents=[common], help="write the value surface as CSV")
    p.add_argument("--out", help="CSV path (default: standard output)")
    p.set_defaults(func=cmd_surface)

    p = sub.add_parser("convergence", parents=[common], help="successive-difference study")
    p.add_argument("--n-list", help="comma-separated increasing n values")
    p.add_argument("--out", help="CSV path for the table")
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("mc", parents=[common], help="Monte Carlo cross-check")
    p.add_argument("--paths", type=int, default=1_000_000)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timing", action="store_true", help="include runtime in the output")
    p.set_defaults(func=cmd_mc)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code
    try:
        return args.func(args)
    except _Exit as exc:
        print(f"fklattice: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"fklattice: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GridTooCoarse as exc:
        print(f"fklattice: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericalError, DomainError, FloatingPointError) as exc:
        print(f"fklattice: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
