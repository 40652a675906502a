"""Command-line front end: tgspec solve|sweep|advise|export."""

import argparse
import itertools
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

from tgspec import __version__, config
from tgspec.errors import (
    ConvergenceError,
    DimensionError,
    DomainError,
    EvaluationError,
    InfeasibleConstraints,
    ProblemFormatError,
    RankDeficientOutputs,
    SingularSystem,
    SizingError,
    TGSpecError,
)
from tgspec.ihoc import (
    Method,
    advise_parameters,
    constraint_trace,
    sample_trajectory,
    solve,
    solve_schedule,
)
from tgspec.quadrature import IntegralId, benchmark_error
from tgspec.tgbasis import TGFamily
from tgspec.utils.data_processing import (
    create_run_log,
    format_report,
    load_problem,
    parse_float_list,
    parse_int_list,
    parse_name_list,
    parse_schedule,
    sweep_table,
    write_csv,
    write_problem,
    write_report,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SOLVER = 3

INPUT_ERRORS = (ProblemFormatError, DomainError, DimensionError)

# Stage reported for each solver failure
FAILED_STAGE = {
    ConvergenceError: "grid",
    EvaluationError: "quadrature",
    SizingError: "assemble",
    SingularSystem: "solve",
    InfeasibleConstraints: "solve",
    RankDeficientOutputs: "gain",
}


def _stage(exc):
    for cls, stage in FAILED_STAGE.items():
        if isinstance(exc, cls):
            return stage
    return "recover"


def _fail(code, message):
    print(f"tgspec: {message}", file=sys.stderr)
    return code


def build_parser():
    parser = argparse.ArgumentParser(prog="tgspec", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="overrides TGSPEC_LOG_LEVEL")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("solve", help="solve an infinite-horizon LQR problem")
    p.add_argument("--problem", default="f16", help="problem file path, or dcs / f16")
    p.add_argument("--family", default="eg", choices=["rg", "eg"])
    alpha = p.add_mutually_exclusive_group()
    alpha.add_argument("--alpha", type=float, default=0.5)
    alpha.add_argument(
        "--alpha-schedule", default=None, help="n:alpha entries, e.g. 10:-0.4,50..120:0"
    )
    p.add_argument("--L", type=float, default=15.0)
    p.add_argument("--n", default="20", help="mesh size or comma-separated list")
    p.add_argument("--method", default="is", choices=[m.value for m in Method])
    p.add_argument("--initial-condition", default="data", choices=["data", "explicit"])
    p.add_argument("--x0", default=None, help="comma-separated initial state override")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--out", default=None)

    p = commands.add_parser("sweep", help="quadrature error sweep over the benchmark integrals")
    p.add_argument("--integrals", default="I1,I2,I3")
    p.add_argument("--family", default="rg,eg", help="comma-separated families")
    p.add_argument("--alphas", default="0.5")
    p.add_argument("--Ls", default="1")
    p.add_argument("--ns", default="2..20")
    p.add_argument("--workers", type=int, default=None, help="overrides TGSPEC_WORKERS")
    p.add_argument("--out", default=None)

    p = commands.add_parser("advise", help="recommended alpha and L ranges")
    p.add_argument("--family", default="eg", choices=["rg", "eg"])
    p.add_argument("--regime", default="stretching", choices=["stretching", "contracting"])
    p.add_argument("--n", type=int, default=20)

    p = commands.add_parser("export", help="write a builtin problem as a problem file")
    p.add_argument("--problem", required=True, choices=["dcs", "f16"])
    p.add_argument("--out", required=True, help="output file")
    return parser


def _solve_inputs(args):
    problem = load_problem(args.problem)
    if args.x0 is not None:
        problem = problem.with_initial_state(parse_float_list(args.x0))
    if args.samples < 2:
        raise DomainError("--samples must be at least 2")
    if args.alpha_schedule is not None:
        schedule = parse_schedule(args.alpha_schedule)
    else:
        schedule = [(n, args.alpha) for n in parse_int_list(args.n)]
        if any(b[0] <= a[0] for a, b in zip(schedule, schedule[1:])):
            raise DomainError("--n values must be strictly increasing")
    return problem, schedule


def cmd_solve(args):
    try:
        problem, schedule = _solve_inputs(args)
    except INPUT_ERRORS as exc:
        return _fail(EXIT_INPUT, f"input error: {exc}")

    out_dir = args.out or config.get_out_dir()
    start = time.perf_counter()
    try:
        if len(schedule) > 1:
            table, grid, report = solve_schedule(
                problem,
                args.family,
                args.L,
                schedule,
                args.method,
                initial_condition=args.initial_condition,
            )
        else:
            n, alpha = schedule[0]
            table = None
            grid, _, report = solve(
                problem,
                args.family,
                alpha,
                args.L,
                n,
                args.method,
                initial_condition=args.initial_condition,
            )
    except (DomainError, DimensionError) as exc:
        return _fail(EXIT_INPUT, f"input error: {exc}")
    except TGSpecError as exc:
        return _fail(EXIT_SOLVER, f"solver error in stage {_stage(exc)}: {exc}")
    seconds = time.perf_counter() - start

    write_csv(
        sample_trajectory(report, grid, problem, args.samples),
        os.path.join(out_dir, "trajectory.csv"),
    )
    write_csv(
        constraint_trace(report, grid, problem, args.samples),
        os.path.join(out_dir, "constraint.csv"),
    )
    if table is not None:
        write_csv(table, os.path.join(out_dir, "schedule.csv"))
    write_report(format_report(report, seconds), os.path.join(out_dir, "report.txt"))
    logger.info("solve finished: J_n=%.6f in %.2f s", report.J_n, seconds)
    return EXIT_OK


def _sweep_tuples(args):
    integrals = [IntegralId.parse(v) for v in parse_name_list(args.integrals)]
    families = [TGFamily.parse(v) for v in parse_name_list(args.family)]
    alphas = parse_float_list(args.alphas)
    Ls = parse_float_list(args.Ls)
    ns = parse_int_list(args.ns)
    return list(itertools.product(integrals, families, alphas, Ls, ns))


def _evaluate(entry):
    return benchmark_error(*entry)


def cmd_sweep(args):
    try:
        tuples = _sweep_tuples(args)
    except INPUT_ERRORS as exc:
        return _fail(EXIT_INPUT, f"input error: {exc}")
    workers = args.workers or config.get_workers()
    logger.info("sweeping %d quadrature configurations on %d worker(s)", len(tuples), workers)
    try:
        if workers == 1:
            rows = [_evaluate(entry) for entry in tuples]
        else:
            # map keeps grid order regardless of completion order
            with ThreadPoolExecutor(max_workers=workers) as pool:
                rows = list(pool.map(_evaluate, tuples))
    except INPUT_ERRORS as exc:
        return _fail(EXIT_INPUT, f"input error: {exc}")
    except TGSpecError as exc:
        return _fail(EXIT_SOLVER, f"solver error in stage {_stage(exc)}: {exc}")
    out_dir = args.out or config.get_out_dir()
    write_csv(sweep_table(rows), os.path.join(out_dir, "sweep.csv"))
    return EXIT_OK


def cmd_advise(args):
    try:
        advice = advise_parameters(args.family, args.regime, args.n)
    except INPUT_ERRORS as exc:
        return _fail(EXIT_INPUT, f"input error: {exc}")
    L_min, L_max = advice.L_range
    print(f"alpha={advice.alpha:g} L_min={L_min:g} L_max={L_max:g}")
    return EXIT_OK


def cmd_export(args):
    write_problem(load_problem(args.problem), args.out)
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "advise": cmd_advise,
    "export": cmd_export,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK

    config.setup_logging(args.log_level)
    config.set_numpy_options()
    config.set_polars_options()
    create_run_log(args.command)
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
