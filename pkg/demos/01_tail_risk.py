"""
Tail risk on a scenario matrix
==============================

Weekly gross returns for three assets, simulated once, then read through
the two standard tail measures: Value-at-Risk (a quantile of the portfolio
return distribution) and Conditional Value-at-Risk (the average of the
tail at and below it).  The scenario that the quantile lands on is exposed
as an explicit index; everything the solver does later is built around
that boundary scenario.
"""

import numpy as np

from dcvar import SyntheticSpec, generate_synthetic, portfolio_returns
from dcvar.risk import discrete_cvar, discrete_var, ru_cvar, tail_index

# simulate 500 weekly scenarios around a gross-return mean near 1.05
mean = np.array([1.05, 1.03, 1.055])
corr = np.array([[1.0, 0.7, 0.3], [0.7, 1.0, 0.4], [0.3, 0.4, 1.0]])
scen = generate_synthetic(SyntheticSpec(mean, 0.0009 * corr, scenario_count=500, seed=7))

w = np.array([0.5, 0.2, 0.3])
r = portfolio_returns(scen, w)
print("portfolio returns: mean %.4f  min %.4f  max %.4f" % (r.mean(), r.min(), r.max()))
print()

# VaR is the level-alpha quantile; CVaR averages the scenarios at or below
# it, so it is never above VaR and it tightens as alpha shrinks
print("alpha     VaR      CVaR")
for alpha in (0.01, 0.05, 0.10):
    print(
        "%.2f   %.4f   %.4f"
        % (alpha, discrete_var(scen, w, alpha), discrete_cvar(scen, w, alpha))
    )
print()

# the same CVaR through the variational max form, as an independent check
gap = abs(ru_cvar(scen, w, 0.05) - discrete_cvar(scen, w, 0.05))
print("sorted-scenario CVaR vs variational form, gap = %.2e" % gap)

# the boundary scenario at alpha = 5%: k scenarios sit strictly inside the
# tail and the boundary absorbs the leftover slice epsilon of the level
ti = tail_index(scen, w, 0.05)
print("tail cut: k = %d scenarios below, epsilon = %.6f" % (ti.k, ti.epsilon))
print(
    "VaR equals the boundary scenario's return:",
    bool(np.isclose(discrete_var(scen, w, 0.05, ti), np.sort(r)[ti.k])),
)

# reweighting the portfolio moves the quantile onto a different scenario
w2 = np.array([0.1, 0.1, 0.8])
ti2 = tail_index(scen, w2, 0.05)
print(
    "after reweighting: boundary scenario %d -> %d, VaR %.4f -> %.4f"
    % (ti.order[ti.k], ti2.order[ti2.k], discrete_var(scen, w, 0.05), discrete_var(scen, w2, 0.05))
)
