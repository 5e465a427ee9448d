import numpy as np
import pytest

from dcvar.data import ScenarioSet
from dcvar.objective import ProblemSpec, g_subgradient, g_value, h_subgradient
from dcvar.risk import tail_cut
from dcvar.subproblem import (
    build_epigraph_qp,
    dump_qp_text,
    kkt_residual_outer,
    solve_subproblem,
    update_epigraph_qp,
)
from support import random_simplex


def _uniform_instance(rng, n=2, s=30, alpha=0.1, tau=1.0, rho=0.1, r_min=0.95):
    returns = 1.0 + 0.05 * rng.standard_normal((s, n))
    scen = ScenarioSet(
        returns=returns,
        probabilities=np.full(s, 1.0 / s),
        asset_names=tuple(f"A{i + 1}" for i in range(n)),
        source_id="qp",
    )
    return ProblemSpec(scenarios=scen, alpha=alpha, r_min=r_min, tau=tau, rho=rho)


def _normalize(w):
    w = np.maximum(np.asarray(w, dtype=float), 0.0)
    return w / w.sum()


def grid_scan_minimum(spec, u, step=1e-4):
    """Independent dense evaluation of g(w) - w'u on the 1-simplex.

    Only valid for n=2 with uniform probabilities: the tail cut is then
    weight-independent, so the whole grid shares one (k, epsilon) pair
    per level and the scan vectorizes over sorted return columns.
    """
    s = spec.scenarios
    x, p = s.returns, s.probabilities
    n_scen = len(p)
    w1 = np.arange(0.0, 1.0 + step / 2, step)
    grid = np.stack([w1, 1.0 - w1], axis=1)
    r = x @ grid.T
    r_sorted = np.sort(r, axis=0)
    a, gm = spec.alpha, spec.gamma

    def cvar_row(level):
        k, eps = tail_cut(p, np.arange(n_scen), level)
        inner = r_sorted[:k].sum(axis=0) / n_scen if k else 0.0
        return (inner + eps * r_sorted[k]) / level

    b1 = (a / gm) * cvar_row(a) - spec.r_min
    b2 = ((a - gm) / gm) * cvar_row(a - gm)
    f = -(p @ r)
    psi = 0.5 * spec.rho * (grid**2).sum(axis=1)
    vals = psi + f + spec.tau * np.maximum(-b1, -b2) - grid @ u
    best = int(np.argmin(vals))
    return float(vals[best]), grid[best]


class TestAssembly:
    def test_shapes(self, toy_spec):
        n, s = 3, 2000
        u = h_subgradient(toy_spec, np.full(3, 1 / 3))
        qp = build_epigraph_qp(toy_spec, u)
        assert qp.n_var == n + 3 + 2 * s
        assert qp.matrix.shape == (1 + n + 4 * s + 2, qp.n_var)
        assert qp.n_eq == 1
        assert qp.rhs[0] == 1.0
        assert qp.rhs[-2] == -toy_spec.r_min
        assert qp.rhs[-1] == 0.0
        assert np.count_nonzero(qp.p_diag[:n]) == n
        assert np.count_nonzero(qp.p_diag[n:]) == 0
        assert qp.q[n] == toy_spec.tau

    def test_rejects_wrong_u_shape(self, toy_spec):
        with pytest.raises(ValueError):
            build_epigraph_qp(toy_spec, np.zeros(2))


class TestSolve:
    def test_objective_matches_direct_evaluation(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            spec = _uniform_instance(rng)
            u = h_subgradient(spec, random_simplex(rng, 2))
            qp = build_epigraph_qp(spec, u)
            sol = solve_subproblem(qp)
            assert sol.status == "optimal"
            w = _normalize(sol.weights)
            direct = g_value(spec, w) - float(w @ u)
            assert sol.objective == pytest.approx(direct, abs=1e-8)

    def test_matches_grid_scan(self):
        rng = np.random.default_rng(1)
        for _ in range(6):
            spec = _uniform_instance(
                rng,
                s=int(rng.integers(20, 41)),
                tau=float(rng.choice([0.5, 2.0])),
                rho=float(rng.choice([0.05, 0.5])),
            )
            u = h_subgradient(spec, random_simplex(rng, 2))
            qp = build_epigraph_qp(spec, u)
            sol = solve_subproblem(qp)
            grid_min, _ = grid_scan_minimum(spec, u)
            assert sol.objective <= grid_min + 1e-6
            assert grid_min - sol.objective <= 1e-3

    def test_duals_satisfy_stationarity(self):
        rng = np.random.default_rng(2)
        spec = _uniform_instance(rng, n=3, s=25)
        u = h_subgradient(spec, random_simplex(rng, 3))
        qp = build_epigraph_qp(spec, u)
        sol = solve_subproblem(qp)
        x, z = sol.variables, sol.duals
        stationarity = qp.p_diag * x + qp.q + qp.matrix.T @ z
        assert np.abs(stationarity).max() < 1e-6
        assert z[qp.n_eq :].min() >= -1e-9
        slack = qp.rhs - qp.matrix @ x
        assert slack[qp.n_eq :].min() >= -1e-7
        comp = z[qp.n_eq :] * slack[qp.n_eq :]
        assert np.abs(comp).max() < 1e-6
        assert sol.pi.shape == (3,)
        assert sol.kkt_residual < 1e-8

    def test_update_matches_fresh_build(self):
        rng = np.random.default_rng(3)
        spec = _uniform_instance(rng, n=3, s=20)
        u1 = h_subgradient(spec, random_simplex(rng, 3))
        u2 = h_subgradient(spec, random_simplex(rng, 3))
        qp = build_epigraph_qp(spec, u1)
        solve_subproblem(qp)
        updated = update_epigraph_qp(qp, u2, spec.tau, spec.rho)
        fresh = build_epigraph_qp(spec, u2)
        assert np.allclose(updated.q, fresh.q, atol=1e-15)
        a = solve_subproblem(updated)
        b = solve_subproblem(fresh)
        assert np.allclose(a.weights, b.weights, atol=1e-9)

    def test_deterministic(self):
        rng = np.random.default_rng(4)
        spec = _uniform_instance(rng, n=3, s=20)
        u = h_subgradient(spec, np.full(3, 1 / 3))
        a = solve_subproblem(build_epigraph_qp(spec, u))
        b = solve_subproblem(build_epigraph_qp(spec, u))
        assert np.array_equal(a.variables, b.variables)

    def test_iteration_cap_degrades_status(self):
        rng = np.random.default_rng(5)
        spec = _uniform_instance(rng, n=3, s=30)
        u = h_subgradient(spec, np.full(3, 1 / 3))
        qp = build_epigraph_qp(spec, u)
        sol = solve_subproblem(qp, max_iterations=1)
        assert sol.status in ("max_iter", "numerical_failure")


class TestOuterResidual:
    def test_hand_built_stationarity(self):
        rng = np.random.default_rng(6)
        spec = _uniform_instance(rng, n=3, s=15)
        w = random_simplex(rng, 3)
        u = h_subgradient(spec, w)
        # choose multipliers that zero the stationarity term exactly,
        # leaving only complementarity and sign violations
        pi = g_subgradient(spec, w) - u
        res = kkt_residual_outer(spec, w, pi, 0.0, u, tau=spec.tau, rho=spec.rho)
        expected = max(
            float(np.abs(pi * w).max()),
            float(np.maximum(-pi, 0.0).max()),
        )
        assert res == pytest.approx(expected, abs=1e-12)

    def test_dump_text(self, tmp_path):
        rng = np.random.default_rng(7)
        spec = _uniform_instance(rng, n=2, s=5)
        u = h_subgradient(spec, np.array([0.5, 0.5]))
        qp = build_epigraph_qp(spec, u)
        path = tmp_path / "qp.txt"
        dump_qp_text(qp, path)
        text = path.read_text()
        assert str(qp.n_var) in text
        assert "rhs" in text or "q" in text
