"""Strongly convex master subproblem as an explicit epigraph QP.

Each outer iteration minimizes g(w) - w @ u over the simplex for a fixed
subgradient u of h.  Both CVaR terms inside g unfold into epigraph form,
giving a sparse QP in the stacked variable

    (w: n, t: 1, a1: 1, a2: 1, z1: S, z2: S)

with objective (rho/2)||w||^2 + (-X'p - u) @ w + tau * t and constraints

    1'w = 1,  w >= 0,
    z1 >= a1 - X w,  z1 >= 0,      (level alpha)
    z2 >= a2 - X w,  z2 >= 0,      (level alpha - gamma)
    t >= -(alpha/gamma) a1 + (1/gamma) p @ z1 + r_min,
    t >= -((alpha-gamma)/gamma) a2 + (1/gamma) p @ z2.

At the optimum t equals the hinge in g exactly (tau > 0), so the QP value
equals g(w) - w @ u with no offset.  Solved with a sparse interior-point
method; duals come back in the convention  P x + q + A' z = 0,  so the
simplex equality dual is nu and the w >= 0 duals are pi as used by the
outer stationarity test.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import clarabel
import numpy as np
import scipy.sparse as sp

from .objective import ProblemSpec, g_subgradient

__all__ = [
    "EpigraphQP",
    "SubproblemSolution",
    "build_epigraph_qp",
    "update_epigraph_qp",
    "solve_subproblem",
    "kkt_residual_outer",
    "dump_qp_text",
]


@dataclass(frozen=True)
class EpigraphQP:
    """Assembled QP data: min 0.5 x'Px + q'x, A_eq x = b_eq, A_in x <= b_in.

    ``matrix`` stacks the equality row first, then inequality rows, in the
    cone order the solver consumes.  Only ``p_diag`` and ``q`` depend on
    (tau, rho, u); reuse the constraint structure across iterations via
    update_epigraph_qp.
    """

    n: int
    s: int
    p_diag: np.ndarray
    q: np.ndarray
    matrix: sp.csc_matrix
    rhs: np.ndarray
    n_eq: int
    tau: float
    rho: float
    u: np.ndarray

    @property
    def n_var(self) -> int:
        return self.n + 3 + 2 * self.s

    @property
    def n_ineq(self) -> int:
        return self.matrix.shape[0] - self.n_eq


@dataclass(frozen=True)
class SubproblemSolution:
    """Primal weights plus the duals the outer KKT test consumes.

    pi are the nonnegativity multipliers, nu the simplex-equality
    multiplier, ``duals`` the full row-dual vector (internal epigraph rows
    included).  status is "optimal" only when the recomputed KKT residual
    meets the requested tolerance; "max_iter" carries the best iterate,
    "numerical_failure" means the iterate is not trustworthy.
    """

    weights: np.ndarray
    objective: float
    pi: np.ndarray
    nu: float
    duals: np.ndarray
    variables: np.ndarray
    kkt_residual: float
    status: str
    iterations: int


def build_epigraph_qp(
    spec: ProblemSpec,
    u: np.ndarray,
    tau: float | None = None,
    rho: float | None = None,
) -> EpigraphQP:
    """Assemble the sparse QP for one linearization point u."""
    tau = spec.tau if tau is None else tau
    rho = spec.rho if rho is None else rho
    x = spec.scenarios.returns
    p = spec.scenarios.probabilities
    s, n = x.shape
    a, gm = spec.alpha, spec.gamma
    u = np.asarray(u, dtype=float)
    if u.shape != (n,):
        raise ValueError(f"u has shape {u.shape}, expected ({n},)")

    n_var = n + 3 + 2 * s
    it, ia1, ia2 = n, n + 1, n + 2
    iz1 = n + 3
    iz2 = n + 3 + s

    p_diag = np.zeros(n_var)
    p_diag[:n] = rho
    q = np.zeros(n_var)
    q[:n] = -(x.T @ p) - u
    q[it] = tau

    # Row 0: simplex equality.  Then n bound rows, two (coupling, bound)
    # blocks of S rows each, and the two epigraph rows.
    rows = [np.zeros(n, dtype=np.int64)]
    cols = [np.arange(n, dtype=np.int64)]
    vals = [np.ones(n)]
    base = 1

    def block(r: np.ndarray, c: np.ndarray, v: np.ndarray) -> None:
        rows.append(r + base)
        cols.append(c)
        vals.append(v)

    # -w <= 0
    block(np.arange(n), np.arange(n), -np.ones(n))
    base += n
    scen = np.repeat(np.arange(s), n)
    wcol = np.tile(np.arange(n), s)
    for za, zi in ((ia1, iz1), (ia2, iz2)):
        # a - X w - z <= 0
        block(scen, wcol, -x.ravel())
        block(np.arange(s), np.full(s, za), np.ones(s))
        block(np.arange(s), zi + np.arange(s), -np.ones(s))
        base += s
        # -z <= 0
        block(np.arange(s), zi + np.arange(s), -np.ones(s))
        base += s
    # epigraph rows
    block(np.zeros(1, dtype=np.int64), np.array([it]), -np.ones(1))
    block(np.zeros(1, dtype=np.int64), np.array([ia1]), np.array([-a / gm]))
    block(np.zeros(s, dtype=np.int64), iz1 + np.arange(s), p / gm)
    base += 1
    block(np.zeros(1, dtype=np.int64), np.array([it]), -np.ones(1))
    block(np.zeros(1, dtype=np.int64), np.array([ia2]), np.array([-(a - gm) / gm]))
    block(np.zeros(s, dtype=np.int64), iz2 + np.arange(s), p / gm)
    base += 1

    matrix = sp.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(base, n_var),
    )
    rhs = np.zeros(base)
    rhs[0] = 1.0
    rhs[base - 2] = -spec.r_min
    return EpigraphQP(
        n=n, s=s, p_diag=p_diag, q=q, matrix=matrix, rhs=rhs, n_eq=1,
        tau=tau, rho=rho, u=u,
    )


def update_epigraph_qp(
    qp: EpigraphQP,
    u: np.ndarray,
    tau: float | None = None,
    rho: float | None = None,
) -> EpigraphQP:
    """New linearization point (and optionally tau, rho); structure reused."""
    tau = qp.tau if tau is None else tau
    rho = qp.rho if rho is None else rho
    u = np.asarray(u, dtype=float)
    if u.shape != (qp.n,):
        raise ValueError(f"u has shape {u.shape}, expected ({qp.n},)")
    q = qp.q.copy()
    q[: qp.n] += qp.u - u
    q[qp.n] = tau
    p_diag = qp.p_diag
    if rho != qp.rho:
        p_diag = p_diag.copy()
        p_diag[: qp.n] = rho
    return replace(qp, q=q, p_diag=p_diag, tau=tau, rho=rho, u=u)


def _kkt_residual(qp: EpigraphQP, x: np.ndarray, z: np.ndarray) -> float:
    """Max-norm KKT residual of the QP at (x, z)."""
    stationarity = qp.p_diag * x + qp.q + qp.matrix.T @ z
    ax = qp.matrix @ x
    eq = np.abs(ax[: qp.n_eq] - qp.rhs[: qp.n_eq])
    slack = qp.rhs[qp.n_eq:] - ax[qp.n_eq:]
    z_in = z[qp.n_eq:]
    pieces = (
        float(np.max(np.abs(stationarity))),
        float(np.max(eq)),
        float(max(np.max(-slack), 0.0)),
        float(max(np.max(-z_in), 0.0)),
        float(np.max(np.abs(z_in * slack))),
    )
    return max(pieces)


_ACCEPT = {
    clarabel.SolverStatus.Solved,
}
_BEST_ITERATE = {
    clarabel.SolverStatus.AlmostSolved,
    clarabel.SolverStatus.MaxIterations,
    clarabel.SolverStatus.MaxTime,
    clarabel.SolverStatus.InsufficientProgress,
}


def solve_subproblem(
    qp: EpigraphQP,
    tol: float = 1e-8,
    max_iterations: int | None = None,
) -> SubproblemSolution:
    """Solve the QP; deterministic for identical inputs.

    The interior-point tolerances are set two orders tighter than ``tol``
    so the independently recomputed KKT residual certifies ``optimal``.
    An exhausted iteration budget downgrades to ``max_iter`` with the best
    iterate; infeasibility claims and numerical breakdowns (impossible for
    this bounded feasible QP unless numerics fail) come back as
    ``numerical_failure``.
    """
    if max_iterations is None:
        max_iterations = min(20 * qp.n_var, 200)
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_threads = 1
    inner = max(tol * 1e-2, 1e-12)
    settings.tol_gap_abs = inner
    settings.tol_gap_rel = inner
    settings.tol_feas = inner
    settings.max_iter = max_iterations
    solver = clarabel.DefaultSolver(
        sp.diags(qp.p_diag, format="csc"), qp.q, qp.matrix, qp.rhs,
        [clarabel.ZeroConeT(qp.n_eq), clarabel.NonnegativeConeT(qp.n_ineq)],
        settings,
    )
    sol = solver.solve()
    x = np.asarray(sol.x, dtype=float)
    z = np.asarray(sol.z, dtype=float)
    n = qp.n
    if sol.status in _ACCEPT or sol.status in _BEST_ITERATE:
        residual = _kkt_residual(qp, x, z)
        status = "optimal" if sol.status in _ACCEPT and residual <= tol else "max_iter"
    else:
        residual = float("inf")
        status = "numerical_failure"
    objective = float(0.5 * (qp.p_diag * x) @ x + qp.q @ x)
    return SubproblemSolution(
        weights=x[:n],
        objective=objective,
        pi=z[qp.n_eq : qp.n_eq + n],
        nu=float(z[0]),
        duals=z,
        variables=x,
        kkt_residual=residual,
        status=status,
        iterations=int(sol.iterations),
    )


def kkt_residual_outer(
    spec: ProblemSpec,
    weights: np.ndarray,
    pi: np.ndarray,
    nu: float,
    u: np.ndarray,
    tau: float | None = None,
    rho: float | None = None,
) -> float:
    """Stationarity distance of (weights, pi, nu) for the penalized problem.

    Largest of: Euclidean norm of  g_subgradient(w) - u - pi + nu * 1,
    complementarity |pi_i w_i|, dual feasibility max(-pi_i, 0), and the
    simplex violation of w.  u must be the h-subgradient used against w.
    """
    w = np.asarray(weights, dtype=float)
    pi = np.asarray(pi, dtype=float)
    s_g = g_subgradient(spec, w, tau=tau, rho=rho)
    stationarity = s_g - np.asarray(u, dtype=float) - pi + nu
    pieces = (
        float(np.linalg.norm(stationarity)),
        float(np.max(np.abs(pi * w))),
        float(max(np.max(-pi), 0.0)),
        abs(float(np.sum(w)) - 1.0),
        float(max(np.max(-w), 0.0)),
    )
    return max(pieces)


def dump_qp_text(qp: EpigraphQP, path: str | Path) -> None:
    """Plain-text dump (row-major, space-separated) for external checking.

    Dense listing; intended for small instances only.
    """
    with open(Path(path), "w") as fh:
        fh.write(f"n {qp.n} scenarios {qp.s} n_eq {qp.n_eq} n_ineq {qp.n_ineq}\n")
        fh.write("P_diag\n" + " ".join(format(v, ".17g") for v in qp.p_diag) + "\n")
        fh.write("q\n" + " ".join(format(v, ".17g") for v in qp.q) + "\n")
        fh.write("A\n")
        dense = qp.matrix.toarray()
        for row in dense:
            fh.write(" ".join(format(v, ".17g") for v in row) + "\n")
        fh.write("b\n" + " ".join(format(v, ".17g") for v in qp.rhs) + "\n")
