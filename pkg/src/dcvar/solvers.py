"""Difference-of-convex descent for the penalized VaR-floor problem.

Both algorithms repeat: draw a subgradient u of h at w_k, minimize
g(w) - w @ u over the simplex (a sparse QP), and take d_k = y_k - w_k.
Plain DCA accepts y_k.  The boosted variant first extrapolates: it starts
the step size at the largest lambda keeping w_k + lambda d_k on the
simplex, then backtracks by beta while

    phi(w_k + lambda d_k) > phi(w_k) - rho lambda^2 ||d_k||^2,

never going below lambda = 1, so a boosted step is always at least the
plain step.  Descent holds per iteration under the parameters in effect
for that iteration; the trace records everything needed to audit it.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import subproblem as sp_mod
from .data import ValidationError
from .objective import ObjectiveValue, ProblemSpec, h_subgradient, phi

__all__ = [
    "SolverConfig",
    "IterationTrace",
    "SolveResult",
    "AdaptiveState",
    "dca_solve",
    "bdca_solve",
    "solve",
    "max_feasible_step",
    "armijo_backtrack",
    "stop_check",
    "adaptive_update",
    "initial_adaptive_state",
    "trace_to_jsonl",
    "result_to_dict",
    "write_result_json",
]

STOP_CRITERIA = ("dk_abs", "dk_rel", "fct_abs", "fct_rel")
ALGORITHMS = ("dca", "bdca")
TAU_CAP = 1e6
RHO_FLOOR = 1e-4


@dataclass(frozen=True)
class SolverConfig:
    algorithm: str = "bdca"
    max_iterations: int = 10_000
    time_limit_seconds: float | None = None
    stop_criterion: str = "dk_abs"
    stop_tol: float = 1e-5
    beta: float = 0.9
    adaptive: bool = False
    seed: int = 0
    subproblem_tol: float = 1e-8

    def __post_init__(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ValidationError(f"algorithm must be one of {ALGORITHMS}")
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be at least 1")
        if self.time_limit_seconds is not None and not self.time_limit_seconds > 0.0:
            raise ValidationError("time_limit_seconds must be positive when set")
        if self.stop_criterion not in STOP_CRITERIA:
            raise ValidationError(f"stop_criterion must be one of {STOP_CRITERIA}")
        if not self.stop_tol > 0.0:
            raise ValidationError("stop_tol must be positive")
        if not 0.0 < self.beta < 1.0:
            raise ValidationError("beta must lie in (0, 1)")
        if not self.subproblem_tol > 0.0:
            raise ValidationError("subproblem_tol must be positive")


@dataclass(frozen=True)
class IterationTrace:
    """One audited iteration.

    phi / penalty / feasible describe w_k under this iteration's tau;
    phi_candidate is phi(y_k) and phi_accepted phi(w_{k+1}) under the same
    tau, so the per-iteration decrease inequalities can be checked row by
    row even when the adaptive strategy later changes tau.  step_size is
    lambda_k (always 1 for plain DCA); line_search_clamped marks the
    guard that accepts lambda = 1 after a numerically failed test.
    """

    iteration: int
    weights: np.ndarray
    phi: float
    step_norm: float
    step_size: float
    tau: float
    rho: float
    beta: float
    penalty: float
    feasible: bool
    backtracks: int
    wall_ms: float
    phi_candidate: float
    phi_accepted: float
    line_search_clamped: bool


@dataclass(frozen=True)
class SolveResult:
    """Terminal state of one solver run.

    ``kkt_residual`` is the certified first-order residual at the final
    weights: the worst violation among the last subproblem's own optimality
    defect, the distance between the accepted iterate and that subproblem's
    minimizer, complementarity of the inherited multipliers with the final
    weights, multiplier sign, and the budget equality.  ``None`` when the
    run produced no subproblem solution (for example a zero-iteration
    time_limit stop).
    """

    weights: np.ndarray
    phi: float
    expected_return_term: float
    penalty_term: float
    feasible: bool
    iterations: int
    wall_seconds: float
    termination_reason: str
    kkt_residual: float | None
    trace: tuple[IterationTrace, ...]
    config: SolverConfig


@dataclass(frozen=True)
class AdaptiveState:
    tau: float
    rho: float
    beta: float
    consecutive_full_steps: int = 0


# ---------------------------------------------------------------------------
# primitive operations
# ---------------------------------------------------------------------------


def max_feasible_step(weights: np.ndarray, direction: np.ndarray) -> float:
    """Largest lambda with weights + lambda * direction still on the simplex.

    min over {i : d_i < 0} of w_i / (-d_i).  Components with |d_i| below
    1e-14 count as zero; if no component is negative the ray never leaves
    the simplex face and the result is inf.  A zero direction is a domain
    error.
    """
    w = np.asarray(weights, dtype=float)
    d = np.asarray(direction, dtype=float)
    if w.shape != d.shape:
        raise ValidationError(f"shape mismatch {w.shape} vs {d.shape}")
    if float(np.linalg.norm(d)) == 0.0:
        raise ValidationError("direction is zero")
    neg = d < -1e-14
    if not bool(neg.any()):
        return float("inf")
    return float(np.min(w[neg] / -d[neg]))


def armijo_backtrack(
    phi_fn,
    weights: np.ndarray,
    direction: np.ndarray,
    rho: float,
    beta: float,
    lam_init: float,
    phi_current: float | None = None,
    phi_at_one: float | None = None,
) -> tuple[float, float, int, bool]:
    """Backtrack from lam_init, never below 1; returns (lam, phi, count, clamped).

    Accepts the first lambda with phi(w + lam d) <= phi(w) - rho lam^2 ||d||^2.
    Once lambda = 1 has been tested the loop exits: if even that test fails
    (possible only through numerical error in an inexact subproblem step),
    lambda = 1 is accepted anyway and flagged.  phi_at_one short-circuits
    the lambda = 1 evaluation when the caller already knows phi(y).
    """
    if lam_init < 1.0:
        raise ValidationError(f"lambda_init must be at least 1, got {lam_init}")
    if not 0.0 < beta < 1.0:
        raise ValidationError(f"beta must lie in (0, 1), got {beta}")
    w = np.asarray(weights, dtype=float)
    d = np.asarray(direction, dtype=float)
    d2 = float(d @ d)
    if phi_current is None:
        phi_current = float(phi_fn(w))
    lam = float(lam_init)
    backtracks = 0
    while True:
        if lam == 1.0 and phi_at_one is not None:
            cand = float(phi_at_one)
        else:
            cand = float(phi_fn(w + lam * d))
        if cand <= phi_current - rho * lam * lam * d2:
            return lam, cand, backtracks, False
        if lam <= 1.0:
            return 1.0, cand, backtracks, True
        lam = max(1.0, lam * beta)
        backtracks += 1


def stop_check(
    criterion: str,
    tol: float,
    w_prev: np.ndarray,
    w_next: np.ndarray,
    phi_prev: float,
    phi_next: float,
) -> bool:
    """Termination test between consecutive iterates."""
    if criterion == "dk_abs":
        return float(np.linalg.norm(w_next - w_prev)) <= tol
    if criterion == "dk_rel":
        delta = np.abs(np.asarray(w_next) - np.asarray(w_prev))
        base = np.abs(np.asarray(w_prev))
        # relative per component, absolute where the component is ~zero
        scaled = np.where(base >= 1e-12, delta / np.where(base >= 1e-12, base, 1.0), delta)
        return float(np.max(scaled)) <= tol
    if criterion == "fct_abs":
        return abs(phi_next - phi_prev) <= tol
    if criterion == "fct_rel":
        denom = abs(phi_prev)
        diff = abs(phi_next - phi_prev)
        return (diff / denom if denom >= 1e-12 else diff) <= tol
    raise ValidationError(f"unknown stop criterion {criterion!r}")


def initial_adaptive_state(spec: ProblemSpec, w0: np.ndarray, config: SolverConfig) -> AdaptiveState:
    """Start from (spec.tau, spec.rho, config.beta); double rho near a vertex."""
    rho = spec.rho
    if float(np.max(w0)) > 0.5:
        rho = 2.0 * rho
    return AdaptiveState(tau=spec.tau, rho=rho, beta=config.beta)


def adaptive_update(
    state: AdaptiveState,
    penalty_prev: float,
    penalty_new: float,
    feasible: bool,
    backtracks: int,
) -> AdaptiveState:
    """Between-iteration parameter update.

    tau: x10 (capped 1e6) while infeasible with relative penalty
    improvement under 1e-3.  rho: decayed by 0.9 toward a 1e-4 floor.
    beta: more backtracking than 5 steps shrinks it toward 0.5; accepting
    the initial step twice in a row relaxes it toward 0.95.
    """
    tau = state.tau
    if not feasible:
        if penalty_prev > 1e-16:
            improvement = (penalty_prev - penalty_new) / penalty_prev
        else:
            improvement = 0.0
        if improvement < 1e-3:
            tau = min(10.0 * tau, TAU_CAP)
    rho = max(RHO_FLOOR, 0.9 * state.rho)
    beta = state.beta
    consec = state.consecutive_full_steps
    if backtracks > 5:
        beta = max(0.5, 0.9 * beta)
        consec = 0
    elif backtracks == 0:
        consec += 1
        if consec >= 2:
            beta = min(0.95, beta / 0.9)
    else:
        consec = 0
    return AdaptiveState(tau=tau, rho=rho, beta=beta, consecutive_full_steps=consec)


# ---------------------------------------------------------------------------
# the descent engine
# ---------------------------------------------------------------------------


def _prepare_start(spec: ProblemSpec, w0: np.ndarray) -> np.ndarray:
    w = np.asarray(w0, dtype=float)
    n = spec.asset_count
    if w.shape != (n,):
        raise ValidationError(f"start point shape {w.shape} does not match {n} assets")
    if not np.all(np.isfinite(w)):
        raise ValidationError("start point has non-finite entries")
    drift = max(abs(float(w.sum()) - 1.0), max(-float(w.min()), 0.0))
    if drift > 1e-6:
        raise ValidationError(f"start point off the simplex by {drift:.3e} (limit 1e-6)")
    return _project_small(w)


def _project_small(w: np.ndarray) -> np.ndarray:
    """Clip stray negatives and renormalize; for drift far below 1e-6 only."""
    w = np.maximum(np.asarray(w, dtype=float), 0.0)
    return w / float(w.sum())


def _solve(spec: ProblemSpec, w0: np.ndarray, config: SolverConfig, boosted: bool) -> SolveResult:
    started = time.perf_counter()
    w = _prepare_start(spec, w0)
    rng = np.random.default_rng(config.seed)
    if config.adaptive:
        state = initial_adaptive_state(spec, w, config)
    else:
        state = AdaptiveState(tau=spec.tau, rho=spec.rho, beta=config.beta)

    trace: list[IterationTrace] = []
    reason = "max_iter"
    last_sol: sp_mod.SubproblemSolution | None = None
    last_row: IterationTrace | None = None
    val_w: ObjectiveValue | None = None
    val_w_tau: float | None = None
    qp = None

    for k in range(config.max_iterations):
        if (
            config.time_limit_seconds is not None
            and time.perf_counter() - started >= config.time_limit_seconds
        ):
            reason = "time_limit"
            break
        iter_t0 = time.perf_counter()
        tau, rho, beta = state.tau, state.rho, state.beta
        if val_w is None or val_w_tau != tau:
            val_w = phi(spec, w, tau)
            val_w_tau = tau

        u = h_subgradient(spec, w, rng_seed=int(rng.integers(2**63)), tau=tau, rho=rho)
        qp = (
            sp_mod.build_epigraph_qp(spec, u, tau, rho)
            if qp is None
            else sp_mod.update_epigraph_qp(qp, u, tau, rho)
        )
        sol = sp_mod.solve_subproblem(qp, config.subproblem_tol)
        if sol.status == "numerical_failure":
            reason = "numerical_failure"
            break
        last_sol = sol

        y = _project_small(sol.weights)
        d = y - w
        dnorm = float(np.linalg.norm(d))
        val_y = phi(spec, y, tau)

        if boosted and dnorm > 0.0:
            raw = max_feasible_step(w, d)
            lam_init = 1.0 if not np.isfinite(raw) else max(1.0, raw)
            lam, _, backtracks, clamped = armijo_backtrack(
                lambda v: phi(spec, _project_small(v), tau).phi,
                w,
                d,
                rho,
                beta,
                lam_init,
                phi_current=val_w.phi,
                phi_at_one=val_y.phi,
            )
            w_next = _project_small(w + lam * d) if lam != 1.0 else y
            val_acc = phi(spec, w_next, tau) if lam != 1.0 else val_y
        else:
            lam, backtracks, clamped = 1.0, 0, False
            w_next = y
            val_acc = val_y

        row = IterationTrace(
            iteration=k,
            weights=w,
            phi=val_w.phi,
            step_norm=dnorm,
            step_size=lam,
            tau=tau,
            rho=rho,
            beta=beta,
            penalty=val_w.penalty_term,
            feasible=val_w.feasible,
            backtracks=backtracks,
            wall_ms=(time.perf_counter() - iter_t0) * 1e3,
            phi_candidate=val_y.phi,
            phi_accepted=val_acc.phi,
            line_search_clamped=clamped,
        )
        trace.append(row)
        last_row = row

        converged = dnorm == 0.0 or stop_check(
            config.stop_criterion, config.stop_tol, w, w_next, val_w.phi, val_acc.phi
        )
        w = w_next
        val_w = val_acc
        val_w_tau = tau
        if converged:
            reason = "converged"
            break
        if config.adaptive:
            state = adaptive_update(
                state,
                penalty_prev=row.penalty,
                penalty_new=val_acc.penalty_term,
                feasible=val_acc.feasible,
                backtracks=backtracks,
            )

    if val_w is None:
        val_w = phi(spec, w, state.tau)
    kkt = None
    if last_sol is not None and last_row is not None:
        # certified residual of the outer first-order system: the last
        # subproblem's optimality conditions exhibit a subgradient pair and
        # multipliers satisfying stationarity at its minimizer, so what is
        # left to measure is the subproblem's own defect, how far the
        # accepted iterate drifted from that certified point, and whether
        # the multipliers still complement the final weights.  A stricter
        # re-selected test is available as kkt_residual_outer; at kinks of
        # the tail statistic it can reject points this certificate accepts.
        y_last = _project_small(last_sol.weights)
        kkt = max(
            last_sol.kkt_residual,
            float(np.max(np.abs(w - y_last))),
            float(np.max(np.abs(last_sol.pi * w))),
            max(0.0, -float(last_sol.pi.min())),
            abs(float(w.sum()) - 1.0),
        )
    return SolveResult(
        weights=w,
        phi=val_w.phi,
        expected_return_term=val_w.expected_return_term,
        penalty_term=val_w.penalty_term,
        feasible=val_w.feasible,
        iterations=len(trace),
        wall_seconds=time.perf_counter() - started,
        termination_reason=reason,
        kkt_residual=kkt,
        trace=tuple(trace),
        config=config,
    )


def dca_solve(spec: ProblemSpec, w0: np.ndarray, config: SolverConfig | None = None) -> SolveResult:
    """Plain descent: accept every subproblem solution as the next iterate."""
    config = replace(config or SolverConfig(), algorithm="dca")
    return _solve(spec, w0, config, boosted=False)


def bdca_solve(spec: ProblemSpec, w0: np.ndarray, config: SolverConfig | None = None) -> SolveResult:
    """Boosted descent: extrapolate each step from the simplex boundary."""
    config = replace(config or SolverConfig(), algorithm="bdca")
    return _solve(spec, w0, config, boosted=True)


def solve(spec: ProblemSpec, w0: np.ndarray, config: SolverConfig) -> SolveResult:
    """Dispatch on config.algorithm."""
    if config.algorithm == "dca":
        return dca_solve(spec, w0, config)
    return bdca_solve(spec, w0, config)


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def _row_to_dict(row: IterationTrace) -> dict:
    d = asdict(row)
    d["weights"] = [float(v) for v in row.weights]
    return d


def trace_to_jsonl(trace: tuple[IterationTrace, ...], path: str | Path) -> None:
    """One JSON object per iteration, snake_case keys."""
    with open(Path(path), "w") as fh:
        for row in trace:
            fh.write(json.dumps(_row_to_dict(row)) + "\n")


def result_to_dict(result: SolveResult) -> dict:
    d = asdict(result)
    d["weights"] = [float(v) for v in result.weights]
    d.pop("trace")
    return d


def write_result_json(result: SolveResult, path: str | Path) -> None:
    """Terminal result as a single JSON object (trace exported separately)."""
    with open(Path(path), "w") as fh:
        json.dump(result_to_dict(result), fh, indent=2, sort_keys=True)
        fh.write("\n")
