"""Multi-start experiment harness with deterministic seeding.

A grid is (r_min values) x (algorithms) x (start schemes) x (start
indices).  Start points are symmetric Dirichlet draws: a tight
concentration near the simplex center or a small one hugging the
boundary.  Every run's seed is a hash of its cell coordinates and the
master seed, so scheduling order and worker count cannot change results;
start points are shared across algorithms and r_min values for paired
comparisons.  Failed solves are recorded, never dropped.

Summaries report per cell: infeasible counts, medians of return
(feasible runs only), iterations and wall time, each with a seeded
percentile-bootstrap confidence interval at a Bonferroni-adjusted level,
plus the best feasible return seen.
"""

from __future__ import annotations

import csv
import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import DatasetReadError, ScenarioSet
from .objective import ProblemSpec
from .solvers import SolverConfig, solve

__all__ = [
    "InitScheme",
    "RunRecord",
    "BootstrapCI",
    "CellSummary",
    "ExperimentGrid",
    "SCHEME_IDS",
    "scheme",
    "sample_start",
    "run_seed",
    "run_experiment",
    "bootstrap_ci",
    "aggregate",
    "write_records_csv",
    "read_records_csv",
    "write_summary_csv",
    "read_summary_csv",
    "write_figure_data",
    "SensitivityRecord",
    "run_sensitivity",
    "write_sensitivity_csv",
]

SCHEME_IDS = ("near_uniform", "skewed")
NEAR_UNIFORM_CONCENTRATION = 350.0
SKEWED_CONCENTRATION = 0.1


@dataclass(frozen=True)
class InitScheme:
    """Symmetric Dirichlet start-point sampler."""

    scheme_id: str
    concentration: float
    seed: int

    def __post_init__(self) -> None:
        if self.scheme_id not in SCHEME_IDS:
            raise ValueError(f"scheme_id must be one of {SCHEME_IDS}")
        if not self.concentration > 0.0:
            raise ValueError("concentration must be positive")


def scheme(scheme_id: str, seed: int) -> InitScheme:
    """Scheme with its standard concentration: 350 centered, 0.1 boundary-hugging."""
    conc = {
        "near_uniform": NEAR_UNIFORM_CONCENTRATION,
        "skewed": SKEWED_CONCENTRATION,
    }[scheme_id]
    return InitScheme(scheme_id=scheme_id, concentration=conc, seed=seed)


def sample_start(init: InitScheme, n_assets: int, draw_index: int) -> np.ndarray:
    """Deterministic in (scheme seed, draw_index); independent across indices."""
    rng = np.random.default_rng(np.random.SeedSequence([init.seed, draw_index]))
    w = rng.dirichlet(np.full(n_assets, init.concentration))
    # a fully underflowed draw (possible at tiny concentration) is redrawn
    while float(w.sum()) == 0.0:
        w = rng.dirichlet(np.full(n_assets, init.concentration))
    w = np.maximum(w, 0.0)
    return w / float(w.sum())


def _hash_seed(*parts) -> int:
    key = "|".join(
        format(p, ".17g") if isinstance(p, float) else str(p) for p in parts
    )
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "big")


def run_seed(
    master_seed: int,
    dataset: str,
    r_min: float,
    algorithm: str,
    scheme_id: str,
    start_index: int,
) -> int:
    """Stable 64-bit seed from the cell coordinates and the master seed."""
    return _hash_seed("run", master_seed, dataset, r_min, algorithm, scheme_id, start_index)


@dataclass(frozen=True)
class RunRecord:
    dataset: str
    r_min: float
    algorithm: str
    scheme: str
    start_index: int
    seed: int
    terminal_return: float
    feasible: bool
    iterations: int
    wall_seconds: float
    termination_reason: str


@dataclass(frozen=True)
class ExperimentGrid:
    """Everything one experiment needs; picklable for worker processes."""

    scenarios: ScenarioSet
    r_min_values: tuple[float, ...]
    algorithms: tuple[str, ...] = ("dca", "bdca")
    scheme_ids: tuple[str, ...] = SCHEME_IDS
    n_starts: int = 250
    master_seed: int = 0
    alpha: float = 0.05
    gamma: float | None = None
    tau: float = 0.01
    rho: float | None = None
    adaptive: bool = False
    beta: float = 0.9
    stop_criterion: str = "dk_abs"
    stop_tol: float = 1e-5
    max_iterations: int = 10_000
    time_limit_seconds: float | None = 240.0
    subproblem_tol: float = 1e-8


def _start_point(grid: ExperimentGrid, scheme_id: str, start_index: int) -> np.ndarray:
    init = scheme(scheme_id, seed=_hash_seed("init", grid.master_seed, scheme_id))
    return sample_start(init, grid.scenarios.asset_count, start_index)


def _run_single(
    grid: ExperimentGrid, r_min: float, algorithm: str, scheme_id: str, start_index: int
) -> RunRecord:
    dataset = grid.scenarios.source_id
    seed = run_seed(grid.master_seed, dataset, r_min, algorithm, scheme_id, start_index)
    base = dict(
        dataset=dataset,
        r_min=r_min,
        algorithm=algorithm,
        scheme=scheme_id,
        start_index=start_index,
        seed=seed,
    )
    try:
        w0 = _start_point(grid, scheme_id, start_index)
        spec = ProblemSpec(
            scenarios=grid.scenarios,
            alpha=grid.alpha,
            gamma=grid.gamma,
            r_min=r_min,
            tau=grid.tau,
            rho=grid.rho,
        )
        config = SolverConfig(
            algorithm=algorithm,
            max_iterations=grid.max_iterations,
            time_limit_seconds=grid.time_limit_seconds,
            stop_criterion=grid.stop_criterion,
            stop_tol=grid.stop_tol,
            beta=grid.beta,
            adaptive=grid.adaptive,
            seed=seed,
            subproblem_tol=grid.subproblem_tol,
        )
        res = solve(spec, w0, config)
        return RunRecord(
            **base,
            terminal_return=-res.expected_return_term,
            feasible=res.feasible,
            iterations=res.iterations,
            wall_seconds=res.wall_seconds,
            termination_reason=res.termination_reason,
        )
    except Exception:
        return RunRecord(
            **base,
            terminal_return=float("nan"),
            feasible=False,
            iterations=0,
            wall_seconds=0.0,
            termination_reason="error",
        )


def _task_list(grid: ExperimentGrid) -> list[tuple[float, str, str, int]]:
    return [
        (r_min, algorithm, scheme_id, start)
        for r_min in grid.r_min_values
        for algorithm in grid.algorithms
        for scheme_id in grid.scheme_ids
        for start in range(grid.n_starts)
    ]


_WORKER_GRID: ExperimentGrid | None = None


def _init_worker(grid: ExperimentGrid) -> None:
    global _WORKER_GRID
    _WORKER_GRID = grid


def _worker_run(task: tuple[float, str, str, int]) -> RunRecord:
    assert _WORKER_GRID is not None
    return _run_single(_WORKER_GRID, *task)


def run_experiment(grid: ExperimentGrid, jobs: int = 1) -> list[RunRecord]:
    """All grid runs in canonical order; jobs > 1 fans out over processes."""
    tasks = _task_list(grid)
    if jobs <= 1:
        return [_run_single(grid, *task) for task in tasks]
    with ProcessPoolExecutor(
        max_workers=jobs, initializer=_init_worker, initargs=(grid,)
    ) as pool:
        return list(pool.map(_worker_run, tasks, chunksize=4))


# ---------------------------------------------------------------------------
# bootstrap confidence intervals and aggregation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BootstrapCI:
    statistic: str
    point: float
    lower: float
    upper: float
    level: float
    comparisons: int
    n_resamples: int

    @property
    def adjusted_level(self) -> float:
        return 1.0 - (1.0 - self.level) / self.comparisons


# fraction = mean of a 0/1 indicator sample
_STATISTICS = {"median": np.median, "mean": np.mean, "fraction": np.mean}


def bootstrap_ci(
    values,
    statistic: str = "median",
    n_resamples: int = 100_000,
    level: float = 0.95,
    comparisons: int = 1,
    seed: int = 0,
) -> BootstrapCI:
    """Seeded percentile bootstrap at a Bonferroni-adjusted level.

    The two-sided level becomes 1 - (1 - level)/comparisons.  Resample
    index rows are drawn from default_rng(seed) as uniform integers in
    row-major order (chunked draws continue the same stream), so the
    procedure is reproducible index for index.  A single observation
    yields the degenerate interval at its value.
    """
    vals = np.asarray(values, dtype=float)
    if vals.ndim != 1 or vals.size == 0:
        raise ValueError("values must be a nonempty 1-d sequence")
    if comparisons < 1:
        raise ValueError("comparisons must be at least 1")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    stat = _STATISTICS.get(statistic) if isinstance(statistic, str) else None
    if isinstance(statistic, str) and stat is None:
        raise ValueError(f"statistic must be one of {tuple(_STATISTICS)} or a callable")
    stat_name = statistic if isinstance(statistic, str) else "custom"
    m = vals.size
    point = float(stat(vals)) if stat else float(statistic(vals))
    if m == 1:
        return BootstrapCI(stat_name, point, point, point, level, comparisons, n_resamples)
    adjusted = 1.0 - (1.0 - level) / comparisons
    rng = np.random.default_rng(seed)
    boot = np.empty(n_resamples)
    block = max(1, 4_000_000 // m)
    pos = 0
    while pos < n_resamples:
        take = min(block, n_resamples - pos)
        idx = rng.integers(0, m, size=(take, m))
        if stat:
            boot[pos : pos + take] = stat(vals[idx], axis=1)
        else:
            boot[pos : pos + take] = [statistic(vals[row]) for row in idx]
        pos += take
    lo = (1.0 - adjusted) / 2.0
    lower, upper = np.quantile(boot, [lo, 1.0 - lo])
    return BootstrapCI(
        stat_name, point, float(lower), float(upper), level, comparisons, n_resamples
    )


def _undefined_ci(stat_name: str) -> BootstrapCI:
    return BootstrapCI(stat_name, math.nan, math.nan, math.nan, math.nan, 1, 0)


@dataclass(frozen=True)
class CellSummary:
    dataset: str
    r_min: float
    algorithm: str
    scheme: str
    runs: int
    infeasible_count: int
    infeasible_fraction: float
    median_return: BootstrapCI
    median_iterations: BootstrapCI
    median_wall_seconds: BootstrapCI
    best_return: float


def aggregate(
    records: list[RunRecord],
    level: float = 0.95,
    n_resamples: int = 100_000,
    seed: int = 0,
) -> list[CellSummary]:
    """Per-cell summaries; the Bonferroni divisor is the number of intervals.

    Return medians use feasible runs only (undefined markers when a cell
    has none); iteration and wall-time medians use every run.
    """
    cells: dict[tuple, list[RunRecord]] = {}
    for rec in records:
        cells.setdefault((rec.dataset, rec.r_min, rec.algorithm, rec.scheme), []).append(rec)
    comparisons = max(1, 3 * len(cells))
    out: list[CellSummary] = []
    for key, recs in cells.items():
        dataset, r_min, algorithm, sch = key
        # samples are sorted so the resample stream, and with it the
        # interval endpoints, cannot depend on record arrival order
        feas = sorted(r.terminal_return for r in recs if r.feasible)
        infeasible = sum(1 for r in recs if not r.feasible)

        def ci(values, stat_name):
            if not len(values):
                return _undefined_ci("median")
            return bootstrap_ci(
                values,
                statistic="median",
                n_resamples=n_resamples,
                level=level,
                comparisons=comparisons,
                seed=_hash_seed("ci", seed, dataset, r_min, algorithm, sch, stat_name),
            )

        out.append(
            CellSummary(
                dataset=dataset,
                r_min=r_min,
                algorithm=algorithm,
                scheme=sch,
                runs=len(recs),
                infeasible_count=infeasible,
                infeasible_fraction=infeasible / len(recs),
                median_return=ci(feas, "return"),
                median_iterations=ci(sorted(r.iterations for r in recs), "iterations"),
                median_wall_seconds=ci(sorted(r.wall_seconds for r in recs), "wall"),
                best_return=max(feas) if feas else math.nan,
            )
        )
    return out


# ---------------------------------------------------------------------------
# CSV emission and ingestion
# ---------------------------------------------------------------------------

_UNDEFINED = "undefined"

RECORD_COLUMNS = (
    "dataset",
    "r_min",
    "algorithm",
    "scheme",
    "start_index",
    "seed",
    "terminal_return",
    "feasible",
    "iterations",
    "wall_seconds",
    "termination_reason",
)


def _fmt(v: float, spec: str = ".17g") -> str:
    return _UNDEFINED if not math.isfinite(v) else format(v, spec)


def _parse(cell: str) -> float:
    return math.nan if cell == _UNDEFINED else float(cell)


def write_records_csv(records: list[RunRecord], path: str | Path) -> None:
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RECORD_COLUMNS)
        for r in records:
            writer.writerow(
                [
                    r.dataset,
                    format(r.r_min, ".17g"),
                    r.algorithm,
                    r.scheme,
                    r.start_index,
                    r.seed,
                    _fmt(r.terminal_return),
                    "true" if r.feasible else "false",
                    r.iterations,
                    format(r.wall_seconds, ".6f"),
                    r.termination_reason,
                ]
            )


def read_records_csv(path: str | Path) -> list[RunRecord]:
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DatasetReadError(f"{path}: {exc.strerror or exc}") from exc
    if not rows or tuple(rows[0]) != RECORD_COLUMNS:
        raise DatasetReadError(f"{path}: not a records CSV (bad header)")
    out = []
    for row in rows[1:]:
        out.append(
            RunRecord(
                dataset=row[0],
                r_min=float(row[1]),
                algorithm=row[2],
                scheme=row[3],
                start_index=int(row[4]),
                seed=int(row[5]),
                terminal_return=_parse(row[6]),
                feasible=row[7] == "true",
                iterations=int(row[8]),
                wall_seconds=float(row[9]),
                termination_reason=row[10],
            )
        )
    return out


SUMMARY_COLUMNS = (
    "dataset",
    "r_min",
    "algorithm",
    "scheme",
    "runs",
    "infeasible_count",
    "infeasible_fraction",
    "median_return",
    "return_lower",
    "return_upper",
    "median_iterations",
    "iterations_lower",
    "iterations_upper",
    "median_wall_seconds",
    "wall_lower",
    "wall_upper",
    "best_return",
    "ci_level",
    "comparisons",
    "n_resamples",
)


def write_summary_csv(summaries: list[CellSummary], path: str | Path) -> None:
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for s in summaries:
            level = s.median_iterations.level
            comparisons = s.median_iterations.comparisons
            n_res = s.median_iterations.n_resamples
            writer.writerow(
                [
                    s.dataset,
                    format(s.r_min, ".17g"),
                    s.algorithm,
                    s.scheme,
                    s.runs,
                    s.infeasible_count,
                    format(s.infeasible_fraction, ".17g"),
                    _fmt(s.median_return.point),
                    _fmt(s.median_return.lower),
                    _fmt(s.median_return.upper),
                    _fmt(s.median_iterations.point),
                    _fmt(s.median_iterations.lower),
                    _fmt(s.median_iterations.upper),
                    _fmt(s.median_wall_seconds.point),
                    _fmt(s.median_wall_seconds.lower),
                    _fmt(s.median_wall_seconds.upper),
                    _fmt(s.best_return),
                    _fmt(level),
                    comparisons,
                    n_res,
                ]
            )


def read_summary_csv(path: str | Path) -> list[CellSummary]:
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DatasetReadError(f"{path}: {exc.strerror or exc}") from exc
    if not rows or tuple(rows[0]) != SUMMARY_COLUMNS:
        raise DatasetReadError(f"{path}: not a summary CSV (bad header)")
    out = []
    for row in rows[1:]:
        level = _parse(row[17])
        comparisons = int(row[18])
        n_res = int(row[19])

        def ci(point, lower, upper):
            return BootstrapCI(
                "median", _parse(point), _parse(lower), _parse(upper),
                level, comparisons, n_res,
            )

        out.append(
            CellSummary(
                dataset=row[0],
                r_min=float(row[1]),
                algorithm=row[2],
                scheme=row[3],
                runs=int(row[4]),
                infeasible_count=int(row[5]),
                infeasible_fraction=float(row[6]),
                median_return=ci(row[7], row[8], row[9]),
                median_iterations=ci(row[10], row[11], row[12]),
                median_wall_seconds=ci(row[13], row[14], row[15]),
                best_return=_parse(row[16]),
            )
        )
    return out


FIGURE_FILES = {
    "median_return": True,
    "median_iterations": True,
    "median_wall_seconds": True,
    "infeasible_fraction": False,
    "best_return": False,
}


def write_figure_data(summaries: list[CellSummary], out_dir: str | Path) -> list[Path]:
    """Long-format per-statistic tables: x = r_min, series = algorithm x scheme."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, with_ci in FIGURE_FILES.items():
        path = out_dir / f"{name}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            header = ["dataset", "r_min", "algorithm", "scheme", "value"]
            if with_ci:
                header += ["lower", "upper"]
            writer.writerow(header)
            for s in summaries:
                if name == "infeasible_fraction":
                    cells = [format(s.infeasible_fraction, ".17g")]
                elif name == "best_return":
                    cells = [_fmt(s.best_return)]
                else:
                    ci: BootstrapCI = getattr(s, name)
                    cells = [_fmt(ci.point), _fmt(ci.lower), _fmt(ci.upper)]
                writer.writerow(
                    [s.dataset, format(s.r_min, ".17g"), s.algorithm, s.scheme] + cells
                )
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# static-parameter sensitivity sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SensitivityRecord:
    dataset: str
    beta: float
    rho: float
    tau: float
    scheme: str
    start_index: int
    seed: int
    terminal_return: float
    feasible: bool
    iterations: int
    wall_seconds: float
    termination_reason: str


@dataclass(frozen=True)
class SensitivityGrid:
    scenarios: ScenarioSet
    r_min: float
    betas: tuple[float, ...] = (0.25, 0.5, 0.75)
    rhos: tuple[float, ...] = (0.1, 1.0, 10.0)
    taus: tuple[float, ...] = (0.1, 1.0, 10.0)
    scheme_ids: tuple[str, ...] = SCHEME_IDS
    n_starts: int = 50
    master_seed: int = 0
    alpha: float = 0.05
    gamma: float | None = None
    stop_criterion: str = "dk_abs"
    stop_tol: float = 1e-5
    max_iterations: int = 10_000
    time_limit_seconds: float | None = 60.0
    subproblem_tol: float = 1e-8


def _sens_tasks(grid: SensitivityGrid):
    return [
        (beta, rho, tau, scheme_id, start)
        for beta in grid.betas
        for rho in grid.rhos
        for tau in grid.taus
        for scheme_id in grid.scheme_ids
        for start in range(grid.n_starts)
    ]


def _sens_single(grid: SensitivityGrid, beta, rho, tau, scheme_id, start) -> SensitivityRecord:
    dataset = grid.scenarios.source_id
    seed = _hash_seed("sens", grid.master_seed, dataset, beta, rho, tau, scheme_id, start)
    base = dict(
        dataset=dataset, beta=beta, rho=rho, tau=tau, scheme=scheme_id,
        start_index=start, seed=seed,
    )
    try:
        init = scheme(scheme_id, seed=_hash_seed("init", grid.master_seed, scheme_id))
        w0 = sample_start(init, grid.scenarios.asset_count, start)
        spec = ProblemSpec(
            scenarios=grid.scenarios, alpha=grid.alpha, gamma=grid.gamma,
            r_min=grid.r_min, tau=tau, rho=rho,
        )
        config = SolverConfig(
            algorithm="bdca",
            max_iterations=grid.max_iterations,
            time_limit_seconds=grid.time_limit_seconds,
            stop_criterion=grid.stop_criterion,
            stop_tol=grid.stop_tol,
            beta=beta,
            adaptive=False,
            seed=seed,
            subproblem_tol=grid.subproblem_tol,
        )
        res = solve(spec, w0, config)
        return SensitivityRecord(
            **base,
            terminal_return=-res.expected_return_term,
            feasible=res.feasible,
            iterations=res.iterations,
            wall_seconds=res.wall_seconds,
            termination_reason=res.termination_reason,
        )
    except Exception:
        return SensitivityRecord(
            **base,
            terminal_return=float("nan"),
            feasible=False,
            iterations=0,
            wall_seconds=0.0,
            termination_reason="error",
        )


_WORKER_SENS: SensitivityGrid | None = None


def _init_sens_worker(grid: SensitivityGrid) -> None:
    global _WORKER_SENS
    _WORKER_SENS = grid


def _sens_worker_run(task) -> SensitivityRecord:
    assert _WORKER_SENS is not None
    return _sens_single(_WORKER_SENS, *task)


def run_sensitivity(grid: SensitivityGrid, jobs: int = 1) -> list[SensitivityRecord]:
    """Static-parameter sweep of the boosted solver over (beta, rho, tau)."""
    tasks = _sens_tasks(grid)
    if jobs <= 1:
        return [_sens_single(grid, *task) for task in tasks]
    with ProcessPoolExecutor(
        max_workers=jobs, initializer=_init_sens_worker, initargs=(grid,)
    ) as pool:
        return list(pool.map(_sens_worker_run, tasks, chunksize=4))


SENSITIVITY_COLUMNS = (
    "dataset",
    "beta",
    "rho",
    "tau",
    "scheme",
    "start_index",
    "seed",
    "terminal_return",
    "feasible",
    "iterations",
    "wall_seconds",
    "termination_reason",
)


def write_sensitivity_csv(records: list[SensitivityRecord], path: str | Path) -> None:
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SENSITIVITY_COLUMNS)
        for r in records:
            writer.writerow(
                [
                    r.dataset,
                    format(r.beta, ".17g"),
                    format(r.rho, ".17g"),
                    format(r.tau, ".17g"),
                    r.scheme,
                    r.start_index,
                    r.seed,
                    _fmt(r.terminal_return),
                    "true" if r.feasible else "false",
                    r.iterations,
                    format(r.wall_seconds, ".6f"),
                    r.termination_reason,
                ]
            )
