import itertools

import numpy as np
import pytest

from dcvar.data import ScenarioSet
from dcvar.risk import (
    DCLevels,
    TailIndex,
    cvar_supergradient,
    default_gamma,
    discrete_cvar,
    discrete_var,
    ru_cvar,
    scenario_order,
    tail_cut,
    tail_index,
)
from support import random_scenarios, random_simplex


def _uniform_set(returns):
    returns = np.asarray(returns, dtype=float)
    s, n = returns.shape
    return ScenarioSet(
        returns=returns,
        probabilities=np.full(s, 1.0 / s),
        asset_names=tuple(f"A{i + 1}" for i in range(n)),
        source_id="hand",
    )


class TestTailIndex:
    def test_twenty_uniform_alpha_five_percent(self):
        scen = _uniform_set(np.linspace(0.9, 1.1, 20).reshape(-1, 1))
        idx = tail_index(scen, np.array([1.0]), 0.05)
        assert (idx.k, idx.epsilon) == (0, pytest.approx(0.05, abs=1e-15))

    def test_twenty_uniform_alpha_ten_percent(self):
        scen = _uniform_set(np.linspace(0.9, 1.1, 20).reshape(-1, 1))
        idx = tail_index(scen, np.array([1.0]), 0.10)
        assert idx.k == 1
        assert idx.epsilon == pytest.approx(0.05, abs=1e-15)

    def test_first_scenario_mass_exceeds_alpha(self):
        # epsilon collapses to alpha when the first sorted scenario
        # already covers the tail
        scen = ScenarioSet(
            returns=np.array([[0.9], [1.0], [1.1]]),
            probabilities=np.array([0.2, 0.4, 0.4]),
            asset_names=("A1",),
            source_id="hand",
        )
        idx = tail_index(scen, np.array([1.0]), 0.05)
        assert idx.k == 0
        assert idx.epsilon == pytest.approx(0.05, abs=1e-15)

    def test_invariant_cumulative_sums(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            scen = random_scenarios(rng)
            w = random_simplex(rng, scen.asset_count)
            alpha = float(rng.uniform(0.02, 0.3))
            idx = tail_index(scen, w, alpha)
            p_sorted = scen.probabilities[idx.order]
            below = float(p_sorted[: idx.k].sum())
            assert below < alpha
            assert below + p_sorted[idx.k] >= alpha
            assert idx.epsilon == pytest.approx(alpha - below, abs=1e-12)
            assert 0.0 < idx.epsilon <= alpha + 1e-15

    def test_validation(self):
        with pytest.raises(ValueError):
            TailIndex(k=3, epsilon=0.01, order=np.arange(3), alpha=0.05)
        with pytest.raises(ValueError):
            TailIndex(k=0, epsilon=0.0, order=np.arange(3), alpha=0.05)
        with pytest.raises(ValueError):
            TailIndex(k=0, epsilon=0.06, order=np.arange(3), alpha=0.05)

    def test_mass_never_reaches_alpha(self):
        with pytest.raises(ValueError):
            tail_cut(np.array([0.1, 0.1]), np.arange(2), 0.5)


class TestDCLevels:
    def test_shifted(self):
        lv = DCLevels(alpha=0.05, gamma=0.01)
        assert lv.shifted == pytest.approx(0.04)

    @pytest.mark.parametrize("alpha,gamma", [(0.0, 0.01), (1.0, 0.01), (0.05, 0.0), (0.05, 0.05), (0.05, 0.06)])
    def test_rejects_bad_levels(self, alpha, gamma):
        with pytest.raises(ValueError):
            DCLevels(alpha=alpha, gamma=gamma)


class TestScenarioOrder:
    def test_stable_on_ties(self):
        returns = np.array([[1.0], [0.9], [1.0], [0.9]])
        order = scenario_order(returns, np.array([1.0]))
        assert list(order) == [1, 3, 0, 2]

    def test_tie_shuffle_deterministic_and_confined(self):
        returns = np.array([[1.0], [0.9], [1.0], [0.9], [1.2]])
        w = np.array([1.0])
        a = scenario_order(returns, w, np.random.default_rng(5))
        b = scenario_order(returns, w, np.random.default_rng(5))
        assert np.array_equal(a, b)
        # tied blocks may permute internally, values stay sorted
        r = (returns @ w)[a]
        assert np.all(np.diff(r) >= 0)
        assert a[4] == 4


class TestCvar:
    def test_twenty_uniform_alpha_five_is_minimum(self):
        rng = np.random.default_rng(0)
        returns = rng.normal(1.0, 0.1, size=(20, 1))
        scen = _uniform_set(returns)
        value = discrete_cvar(scen, np.array([1.0]), 0.05)
        assert value == pytest.approx(float(returns.min()), abs=1e-15)

    def test_twenty_uniform_alpha_ten_averages_two(self):
        rng = np.random.default_rng(1)
        returns = rng.normal(1.0, 0.1, size=(20, 1))
        scen = _uniform_set(returns)
        lo = np.sort(returns[:, 0])
        value = discrete_cvar(scen, np.array([1.0]), 0.10)
        assert value == pytest.approx(0.5 * lo[0] + 0.5 * lo[1], abs=1e-14)

    def test_var_is_boundary_return(self):
        rng = np.random.default_rng(2)
        returns = rng.normal(1.0, 0.1, size=(20, 1))
        scen = _uniform_set(returns)
        assert discrete_var(scen, np.array([1.0]), 0.05) == pytest.approx(
            float(np.sort(returns[:, 0])[0]), abs=1e-15
        )

    def test_cvar_below_var(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            scen = random_scenarios(rng)
            w = random_simplex(rng, scen.asset_count)
            for alpha in (0.01, 0.05, 0.1):
                idx = tail_index(scen, w, alpha)
                assert discrete_cvar(scen, w, alpha, idx) <= discrete_var(
                    scen, w, alpha, idx
                ) + 1e-12

    def test_uniform_epsilon_weight_independent(self):
        rng = np.random.default_rng(4)
        scen = random_scenarios(rng, n_assets=4, n_scenarios=20, uniform=True)
        alpha = 0.07  # alpha * S = 1.4, epsilon = alpha - 1/20
        expected = alpha - np.floor(alpha * 20) / 20
        for _ in range(10):
            idx = tail_index(scen, random_simplex(rng, 4), alpha)
            assert idx.epsilon == pytest.approx(expected, abs=1e-12)

    def test_tied_boundary_value_well_defined(self):
        returns = np.array([[1.2, 1.2], [0.8, 1.0], [0.9, 0.9], [1.4, 1.0]])
        scen = _uniform_set(returns)
        w = np.array([0.5, 0.5])  # rows 1,2 tie at 0.9; rows 0,3 tie at 1.2
        values = set()
        for seed in range(8):
            idx = tail_index(scen, w, 0.6, np.random.default_rng(seed))
            values.add(round(discrete_var(scen, w, 0.6, idx), 15))
        assert values == {1.2}


class TestSupergradient:
    def test_single_asset_matches_derivative(self):
        rng = np.random.default_rng(5)
        scen = random_scenarios(rng, n_assets=1, n_scenarios=15, uniform=True)
        w = np.array([1.0])
        idx = tail_index(scen, w, 0.2)
        grad = cvar_supergradient(scen, w, 0.2, idx)
        assert grad.shape == (1,)
        # single asset: cvar is linear in the weight, slope equals its value
        assert grad[0] == pytest.approx(discrete_cvar(scen, w, 0.2, idx), abs=1e-12)

    def test_finite_difference(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            scen = random_scenarios(rng, n_assets=3, n_scenarios=25)
            w = random_simplex(rng, 3)
            idx = tail_index(scen, w, 0.1)
            grad = cvar_supergradient(scen, w, 0.1, idx)
            h = 1e-7
            for i in range(3):
                e = np.zeros(3)
                e[i] = h
                fd = (
                    discrete_cvar(scen, w + e, 0.1) - discrete_cvar(scen, w - e, 0.1)
                ) / (2 * h)
                assert grad[i] == pytest.approx(fd, abs=1e-6)

    def test_concavity_inequality(self):
        rng = np.random.default_rng(7)
        for _ in range(40):
            scen = random_scenarios(rng)
            w = random_simplex(rng, scen.asset_count)
            v = random_simplex(rng, scen.asset_count)
            idx = tail_index(scen, w, 0.1)
            grad = cvar_supergradient(scen, w, 0.1, idx)
            lhs = discrete_cvar(scen, v, 0.1)
            rhs = discrete_cvar(scen, w, 0.1, idx) + float(grad @ (v - w))
            assert lhs <= rhs + 1e-10

    def test_tied_boundary_membership(self):
        returns = np.array([[1.2, 1.2], [0.8, 1.0], [0.9, 0.9], [1.4, 1.0]])
        scen = _uniform_set(returns)
        w = np.array([0.5, 0.5])
        alpha = 0.6
        r = returns @ w
        base = np.argsort(r, kind="stable")
        # enumerate every ordering of the tied blocks to get the extreme set
        blocks = [[1, 2], [0, 3]]
        extremes = []
        for perm1 in itertools.permutations(blocks[0]):
            for perm2 in itertools.permutations(blocks[1]):
                order = np.array(list(perm1) + list(perm2))
                assert sorted(order.tolist()) == sorted(base.tolist())
                k, eps = tail_cut(scen.probabilities, order, alpha)
                idx = TailIndex(k=k, epsilon=eps, order=order, alpha=alpha)
                extremes.append(cvar_supergradient(scen, w, alpha, idx))
        for seed in range(6):
            idx = tail_index(scen, w, alpha, np.random.default_rng(seed))
            grad = cvar_supergradient(scen, w, alpha, idx)
            assert any(np.allclose(grad, g, atol=1e-12) for g in extremes)


class TestRuOracle:
    def test_two_scenarios_half_level(self):
        scen = _uniform_set(np.array([[0.9], [1.1]]))
        assert ru_cvar(scen, np.array([1.0]), 0.5) == pytest.approx(0.9, abs=1e-15)

    def test_single_scenario_any_level(self):
        scen = _uniform_set(np.array([[1.07, 0.93]]))
        w = np.array([0.25, 0.75])
        expected = 0.25 * 1.07 + 0.75 * 0.93
        for alpha in (0.01, 0.5, 0.99):
            assert ru_cvar(scen, w, alpha) == pytest.approx(expected, abs=1e-14)

    def test_matches_discrete_cvar(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            scen = random_scenarios(rng)
            w = random_simplex(rng, scen.asset_count)
            alpha = float(rng.uniform(0.02, 0.4))
            assert abs(
                discrete_cvar(scen, w, alpha) - ru_cvar(scen, w, alpha)
            ) < 1e-10


class TestDcIdentity:
    def test_identity_random_instances(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            scen = random_scenarios(rng)
            w = random_simplex(rng, scen.asset_count)
            alpha = float(rng.choice([0.05, 0.1]))
            idx = tail_index(scen, w, alpha)
            for frac in (0.25, 0.5, 0.75):
                gamma = frac * idx.epsilon
                lhs = (alpha / gamma) * discrete_cvar(scen, w, alpha) - (
                    (alpha - gamma) / gamma
                ) * discrete_cvar(scen, w, alpha - gamma)
                assert abs(lhs - discrete_var(scen, w, alpha)) < 1e-10


class TestDefaultGamma:
    def test_uniform_half_epsilon(self):
        p = np.full(2000, 1 / 2000)
        # alpha*S integral: boundary holds mass 1/S, gamma is half of that
        assert default_gamma(p, 0.05) == pytest.approx(0.00025, abs=1e-15)

    def test_accepts_container(self, toy_scenarios):
        assert default_gamma(toy_scenarios, 0.05) == pytest.approx(0.00025, abs=1e-15)

    def test_rejects_non_uniform(self):
        with pytest.raises(ValueError):
            default_gamma(np.array([0.5, 0.3, 0.2]), 0.05)
