"""Shared helpers: every solve in the suite goes through checked_solve.

The descent-invariant assertions here back the runtime-correctness
acceptance check: step sizes at least one, per-iteration sufficient
decrease, iterates on the simplex, and a nonincreasing objective within
constant-penalty segments.  A module-level registry counts solves and
rows so the acceptance test can report coverage and zero violations.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from dcvar.data import ScenarioSet, load_scenarios
from dcvar.objective import phi as phi_at
from dcvar.solvers import SolverConfig, solve

DECREASE_SLACK = 1e-7
SIMPLEX_TOL = 1e-8

REPO_ROOT = Path(__file__).resolve().parent.parent
DATA_DIR = REPO_ROOT / "data"

# (rows, columns) of the public weekly gross-return files, keyed by stem
DATASET_SHAPES = {
    "dj": (1363, 28),
    "ff49": (2325, 49),
    "ftse": (717, 83),
    "nasdaq": (596, 82),
}


class SolveRegistry:
    def __init__(self) -> None:
        self.solves = 0
        self.rows_checked = 0

    def reset(self) -> None:
        self.solves = 0
        self.rows_checked = 0


REGISTRY = SolveRegistry()


def assert_solve_invariants(spec, result) -> None:
    """Descent and feasibility invariants on one finished solve."""
    rows = result.trace
    for row in rows:
        w = np.asarray(row.weights)
        assert abs(float(w.sum()) - 1.0) <= SIMPLEX_TOL, "iterate off the simplex"
        assert float(w.min()) >= -SIMPLEX_TOL, "negative weight in iterate"
        assert row.step_size >= 1.0, f"step size {row.step_size} below one"
        if result.config.algorithm == "dca":
            assert row.step_size == 1.0 and row.backtracks == 0

        recomputed = phi_at(spec, w, tau=row.tau).phi
        assert abs(recomputed - row.phi) <= 1e-9 * max(1.0, abs(row.phi)), (
            "trace phi does not match recomputation"
        )
        decrease_floor = row.phi - row.rho * row.step_size**2 * row.step_norm**2
        assert row.phi_accepted <= decrease_floor + DECREASE_SLACK, (
            f"sufficient decrease violated: {row.phi_accepted} vs {decrease_floor}"
        )
        assert row.phi_candidate <= row.phi + DECREASE_SLACK

    for prev, nxt in zip(rows, rows[1:]):
        if prev.tau == nxt.tau:
            assert nxt.phi <= prev.phi + DECREASE_SLACK, "phi increased within a segment"

    w_final = np.asarray(result.weights)
    assert abs(float(w_final.sum()) - 1.0) <= SIMPLEX_TOL
    assert float(w_final.min()) >= -SIMPLEX_TOL
    assert result.iterations == len(rows)
    if result.termination_reason == "converged" and result.iterations > 0:
        assert result.kkt_residual is not None
    limit = result.config.time_limit_seconds
    if limit is not None:
        assert result.wall_seconds <= limit * 1.1 + 1.0

    REGISTRY.solves += 1
    REGISTRY.rows_checked += len(rows)


def checked_solve(spec, w0, config=None):
    if config is None:
        config = SolverConfig()
    result = solve(spec, w0, config)
    assert_solve_invariants(spec, result)
    return result


def random_scenarios(
    rng: np.random.Generator,
    n_assets: int | None = None,
    n_scenarios: int | None = None,
    uniform: bool = False,
    scale: float = 0.05,
) -> ScenarioSet:
    """Small random instance for property tests; returns may go negative."""
    n = n_assets if n_assets is not None else int(rng.integers(2, 9))
    s = n_scenarios if n_scenarios is not None else int(rng.integers(3, 51))
    returns = 1.0 + scale * rng.standard_normal((s, n))
    if uniform:
        p = np.full(s, 1.0 / s)
    else:
        p = rng.random(s) + 0.05
        p = p / p.sum()
    return ScenarioSet(
        returns=returns,
        probabilities=p,
        asset_names=tuple(f"A{i + 1}" for i in range(n)),
        source_id="random",
    )


def random_simplex(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.dirichlet(np.ones(n))


def external_scenarios(name: str) -> ScenarioSet:
    """Load a public weekly-return file from data/, or skip the test."""
    path = DATA_DIR / f"{name}.csv"
    if not path.exists():
        pytest.skip(
            f"dataset file {path} not present; place the public weekly "
            f"gross-return CSV there to enable this check"
        )
    scen = load_scenarios(path)
    expected = DATASET_SHAPES[name]
    assert (scen.scenario_count, scen.asset_count) == expected, (
        f"{name}: expected shape {expected}, "
        f"got {(scen.scenario_count, scen.asset_count)}"
    )
    return scen
