"""Command-line front end.

Subcommands: solve (one run, JSON result + JSONL trace), bench
(multi-start grid, records/summary/figure CSVs), sensitivity (static
beta/rho/tau sweep), stats (per-asset summary table), synth (write a
synthetic scenario CSV).  Every run is deterministic given --seed.

Exit codes: 0 success, 2 iteration/time budget exhausted, 1 unexpected
error, 64 usage, 65 invalid values, 66 unreadable input file.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .bench import (
    SCHEME_IDS,
    ExperimentGrid,
    SensitivityGrid,
    aggregate,
    run_experiment,
    run_sensitivity,
    write_figure_data,
    write_records_csv,
    write_sensitivity_csv,
    write_summary_csv,
)
from .data import (
    DataError,
    DatasetReadError,
    SyntheticSpec,
    ValidationError,
    generate_synthetic,
    load_scenarios,
    summary_stats,
    write_scenarios_csv,
    write_stats_csv,
)
from .objective import ProblemSpec
from .solvers import (
    ALGORITHMS,
    STOP_CRITERIA,
    SolverConfig,
    solve,
    trace_to_jsonl,
    write_result_json,
)

__all__ = ["main", "entry_point"]

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_BUDGET = 2
EXIT_USAGE = 64
EXIT_INVALID = 65
EXIT_UNREADABLE = 66

BENCH_R_MIN = (0.96, 0.966, 0.968, 0.97, 0.972)

log = logging.getLogger("dcvar")


class _Parser(argparse.ArgumentParser):
    """Usage problems exit 64, freeing code 2 for exhausted run budgets."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _scheme_ids(choice: str) -> tuple[str, ...]:
    return {"1": (SCHEME_IDS[0],), "2": (SCHEME_IDS[1],), "both": SCHEME_IDS}[choice]


def _float_list(text: str) -> np.ndarray:
    try:
        values = np.array([float(cell) for cell in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated number list: {text!r}")
    if values.size == 0:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _float_matrix(text: str) -> np.ndarray:
    try:
        rows = [[float(cell) for cell in row.split(",")] for row in text.split(";")]
        return np.array(rows)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"not ';'-separated rows of ','-separated numbers: {text!r}"
        )


def _add_problem_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, default=0.05, help="tail probability level")
    p.add_argument("--gamma", type=float, default=None,
                   help="level shift for the risk decomposition (default: auto)")
    p.add_argument("--tau", type=float, default=0.01, help="penalty weight")
    p.add_argument("--rho", type=float, default=None,
                   help="proximal weight (default: 0.01 per asset)")


def _add_solver_flags(p: argparse.ArgumentParser, time_limit: float | None) -> None:
    p.add_argument("--beta", type=float, default=0.9, help="backtracking factor")
    p.add_argument("--adaptive", action="store_true",
                   help="enable run-time tau/rho/beta adjustment")
    p.add_argument("--stop", choices=STOP_CRITERIA, default="dk_abs",
                   help="stopping criterion")
    p.add_argument("--tol", type=float, default=1e-5, help="stopping tolerance")
    p.add_argument("--max-iter", type=_positive_int, default=10_000,
                   help="outer iteration cap")
    p.add_argument("--time-limit", type=float, default=time_limit,
                   help="wall-clock budget in seconds")


def build_parser() -> _Parser:
    parser = _Parser(prog="dcvar", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="increase log detail (repeatable)")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("solve", help="run one solve from a uniform start")
    p.add_argument("--data", required=True, help="scenario CSV path")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--algorithm", choices=ALGORITHMS, default="bdca")
    p.add_argument("--r-min", type=float, default=0.97, help="return floor")
    _add_problem_flags(p)
    _add_solver_flags(p, time_limit=None)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench", help="multi-start benchmark over a threshold grid")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--algorithm", choices=ALGORITHMS, default=None,
                   help="restrict to one algorithm (default: run both)")
    p.add_argument("--r-min", type=float, nargs="+", default=list(BENCH_R_MIN),
                   help="return floors to sweep")
    _add_problem_flags(p)
    _add_solver_flags(p, time_limit=240.0)
    p.add_argument("--starts", type=_positive_int, default=250,
                   help="start points per scheme")
    p.add_argument("--scheme", choices=("1", "2", "both"), default="both",
                   help="1 = near-uniform starts, 2 = skewed starts")
    p.add_argument("--jobs", type=_positive_int, default=None,
                   help="worker processes (default: logical cores)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("sensitivity", help="static beta/rho/tau sweep of the boosted solver")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--r-min", type=float, default=0.97)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--beta", type=float, nargs="+", default=[0.25, 0.5, 0.75])
    p.add_argument("--rho", type=float, nargs="+", default=[0.1, 1.0, 10.0])
    p.add_argument("--tau", type=float, nargs="+", default=[0.1, 1.0, 10.0])
    p.add_argument("--stop", choices=STOP_CRITERIA, default="dk_abs")
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--max-iter", type=_positive_int, default=10_000)
    p.add_argument("--time-limit", type=float, default=60.0)
    p.add_argument("--starts", type=_positive_int, default=50)
    p.add_argument("--scheme", choices=("1", "2", "both"), default="both")
    p.add_argument("--jobs", type=_positive_int, default=None)
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("stats", help="per-asset summary statistics table")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("synth", help="write a synthetic multivariate-normal scenario CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scenarios", type=_positive_int, default=2000,
                   help="number of scenario rows")
    p.add_argument("--mean", type=_float_list, default="1.05,1.03,1.055",
                   help="comma-separated asset means")
    p.add_argument("--cov", type=_float_matrix, default=None,
                   help="covariance rows, ';'-separated rows of ','-separated "
                        "entries (default: a mildly correlated 3-asset matrix)")
    p.set_defaults(func=cmd_synth)

    return parser


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _print_kv(pairs) -> None:
    for key, value in pairs:
        print(f"{key} {value}")


def cmd_solve(args) -> int:
    scenarios = load_scenarios(args.data)
    out = _out_dir(args)
    spec = ProblemSpec(
        scenarios=scenarios, alpha=args.alpha, gamma=args.gamma,
        r_min=args.r_min, tau=args.tau, rho=args.rho,
    )
    config = SolverConfig(
        algorithm=args.algorithm, max_iterations=args.max_iter,
        time_limit_seconds=args.time_limit, stop_criterion=args.stop,
        stop_tol=args.tol, beta=args.beta, adaptive=args.adaptive, seed=args.seed,
    )
    n = scenarios.asset_count
    w0 = np.full(n, 1.0 / n)
    result = solve(spec, w0, config)
    write_result_json(result, out / "result.json")
    trace_to_jsonl(result.trace, out / "trace.jsonl")
    _print_kv(
        [
            ("terminal_return", format(-result.expected_return_term, ".12g")),
            ("feasible", "true" if result.feasible else "false"),
            ("iterations", result.iterations),
            ("wall_seconds", format(result.wall_seconds, ".3f")),
            ("termination_reason", result.termination_reason),
        ]
    )
    if result.termination_reason == "converged":
        return EXIT_OK
    if result.termination_reason in ("max_iter", "time_limit"):
        return EXIT_BUDGET
    return EXIT_ERROR


def cmd_bench(args) -> int:
    scenarios = load_scenarios(args.data)
    out = _out_dir(args)
    algorithms = ALGORITHMS if args.algorithm is None else (args.algorithm,)
    grid = ExperimentGrid(
        scenarios=scenarios,
        r_min_values=tuple(args.r_min),
        algorithms=algorithms,
        scheme_ids=_scheme_ids(args.scheme),
        n_starts=args.starts,
        master_seed=args.seed,
        alpha=args.alpha,
        gamma=args.gamma,
        tau=args.tau,
        rho=args.rho,
        adaptive=args.adaptive,
        beta=args.beta,
        stop_criterion=args.stop,
        stop_tol=args.tol,
        max_iterations=args.max_iter,
        time_limit_seconds=args.time_limit,
    )
    records = run_experiment(grid, jobs=args.jobs or _default_jobs())
    summaries = aggregate(records)
    write_records_csv(records, out / "records.csv")
    write_summary_csv(summaries, out / "summary.csv")
    write_figure_data(summaries, out / "figure_data")
    infeasible = sum(1 for r in records if not r.feasible)
    _print_kv(
        [
            ("runs", len(records)),
            ("infeasible", infeasible),
            ("records", out / "records.csv"),
            ("summary", out / "summary.csv"),
            ("figure_data", out / "figure_data"),
        ]
    )
    return EXIT_OK


def cmd_sensitivity(args) -> int:
    scenarios = load_scenarios(args.data)
    out = _out_dir(args)
    grid = SensitivityGrid(
        scenarios=scenarios,
        r_min=args.r_min,
        betas=tuple(args.beta),
        rhos=tuple(args.rho),
        taus=tuple(args.tau),
        scheme_ids=_scheme_ids(args.scheme),
        n_starts=args.starts,
        master_seed=args.seed,
        alpha=args.alpha,
        gamma=args.gamma,
        stop_criterion=args.stop,
        stop_tol=args.tol,
        max_iterations=args.max_iter,
        time_limit_seconds=args.time_limit,
    )
    records = run_sensitivity(grid, jobs=args.jobs or _default_jobs())
    write_sensitivity_csv(records, out / "sensitivity.csv")
    _print_kv([("runs", len(records)), ("sensitivity", out / "sensitivity.csv")])
    return EXIT_OK


def cmd_stats(args) -> int:
    scenarios = load_scenarios(args.data)
    out = _out_dir(args)
    stats = summary_stats(scenarios, alpha=args.alpha)
    path = out / "stats.csv"
    write_stats_csv(stats, path)
    _print_kv([("assets", scenarios.asset_count),
               ("scenarios", scenarios.scenario_count),
               ("stats", path)])
    return EXIT_OK


_DEFAULT_COV = "0.0009,0.00063,0.00027;0.00063,0.0009,0.00036;0.00027,0.00036,0.0009"


def cmd_synth(args) -> int:
    out = _out_dir(args)
    mean = args.mean
    cov = args.cov if args.cov is not None else _float_matrix(_DEFAULT_COV)
    if cov.ndim != 2 or cov.shape != (mean.size, mean.size):
        raise ValidationError(
            f"covariance shape {cov.shape} does not match {mean.size} means"
        )
    spec = SyntheticSpec(
        mean=mean, covariance=cov, scenario_count=args.scenarios, seed=args.seed
    )
    scenarios = generate_synthetic(spec)
    path = out / f"{scenarios.source_id}.csv"
    write_scenarios_csv(scenarios, path)
    _print_kv([("assets", scenarios.asset_count),
               ("scenarios", scenarios.scenario_count),
               ("dataset", path)])
    return EXIT_OK


def _default_jobs() -> int:
    import os

    return os.cpu_count() or 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except DatasetReadError as exc:
        print(f"dcvar: {exc}", file=sys.stderr)
        return EXIT_UNREADABLE
    except (ValidationError, DataError) as exc:
        print(f"dcvar: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"dcvar: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:
        log.debug("unexpected failure", exc_info=True)
        print(f"dcvar: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
