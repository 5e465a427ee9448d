"""Discrete lower-tail risk measures on scenario return matrices.

Scenarios enter either as a container with ``.returns``/``.probabilities``
or as a bare (S, n) matrix X of gross returns plus a ``probabilities=``
vector p.  For a weight vector w the portfolio return in scenario j is
``X[j] @ w``; all tail quantities are read off the ascending sort of those
S numbers.

The boundary of the lower alpha-tail is described by a pair (k, epsilon):
k is the largest count of sorted scenarios whose total probability stays
strictly below alpha, and epsilon = alpha minus that mass.  With those,

* VaR  at level alpha is the (k+1)-th sorted portfolio return,
* CVaR at level alpha is the probability-weighted average of the k tail
  returns plus an epsilon-weighted share of the boundary return,

and CVaR at two nearby levels recovers VaR exactly:

    VaR_alpha(w) = (alpha/gamma) CVaR_alpha(w)
                 - ((alpha-gamma)/gamma) CVaR_{alpha-gamma}(w)

for any 0 < gamma < epsilon.  ``ru_cvar`` provides an independent oracle
for CVaR via the threshold maximization it is equivalent to.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "TailIndex",
    "DCLevels",
    "scenario_order",
    "tail_cut",
    "tail_index",
    "discrete_cvar",
    "discrete_var",
    "cvar_supergradient",
    "ru_cvar",
    "default_gamma",
]


# ---------------------------------------------------------------------------
# types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TailIndex:
    """Sorted-scenario view of one (weights, alpha) tail.

    ``order`` permutes scenarios so portfolio returns ascend; ``k`` counts
    the scenarios strictly inside the tail, so ``order[k]`` is the boundary
    scenario and ``epsilon`` is the probability mass left of alpha that the
    boundary scenario absorbs.
    """

    k: int
    epsilon: float
    order: np.ndarray
    alpha: float

    def __post_init__(self) -> None:
        s = len(self.order)
        if not 0 <= self.k < s:
            raise ValueError(f"boundary index {self.k} outside [0, {s})")
        if not 0.0 < self.epsilon <= self.alpha:
            raise ValueError(f"epsilon {self.epsilon} outside (0, alpha]")


@dataclass(frozen=True)
class DCLevels:
    """A tail level alpha paired with a strictly smaller shift gamma.

    gamma must stay inside (0, epsilon) for the two-level VaR identity to
    hold; epsilon depends on the probabilities, so only the cheap bound
    gamma < alpha is enforced here and the strict bound is checked where a
    concrete tail is available.
    """

    alpha: float
    gamma: float

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 < self.gamma < self.alpha:
            raise ValueError(
                f"gamma must lie in (0, alpha); got gamma={self.gamma}, alpha={self.alpha}"
            )

    @property
    def shifted(self) -> float:
        return self.alpha - self.gamma


# ---------------------------------------------------------------------------
# sorting and the tail cut
# ---------------------------------------------------------------------------


def scenario_order(
    returns: np.ndarray,
    weights: np.ndarray,
    tie_rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Permutation sorting portfolio returns ascending.

    The sort is stable (ties keep original scenario order).  When tie_rng
    is given, each block of exactly equal returns is shuffled with it; this
    is the hook used where the algorithms ask for a random element of a
    subdifferential, and it touches nothing outside tied blocks.
    """
    r = np.asarray(returns) @ np.asarray(weights)
    order = np.argsort(r, kind="stable")
    if tie_rng is None:
        return order
    sorted_r = r[order]
    change = np.flatnonzero(np.diff(sorted_r) != 0.0) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change, [len(r)]))
    out = order.copy()
    for lo, hi in zip(starts, ends):
        if hi - lo > 1:
            out[lo:hi] = out[lo:hi][tie_rng.permutation(hi - lo)]
    return out


def tail_cut(probabilities: np.ndarray, order: np.ndarray, alpha: float) -> tuple[int, float]:
    """(k, epsilon) at level alpha for an already sorted scenario order.

    k is the largest count of leading sorted scenarios with cumulative
    probability strictly below alpha (zero when the first already reaches
    alpha); epsilon = alpha - that cumulative mass, always in (0, alpha].
    """
    csum = np.cumsum(np.asarray(probabilities)[order])
    k = int(np.searchsorted(csum, alpha, side="left"))
    if k >= len(csum):
        raise ValueError(f"probability mass {csum[-1]} never reaches alpha={alpha}")
    epsilon = alpha - (float(csum[k - 1]) if k > 0 else 0.0)
    return k, epsilon


def _arrays(scenarios, probabilities) -> tuple[np.ndarray, np.ndarray]:
    # accepts a scenario container (anything with .returns/.probabilities)
    # or a bare S x n matrix plus an explicit probabilities= vector
    if hasattr(scenarios, "returns") and hasattr(scenarios, "probabilities"):
        if probabilities is not None:
            raise TypeError(
                "probabilities is taken from the scenario container; "
                "pass it only with a bare return matrix"
            )
        return np.asarray(scenarios.returns), np.asarray(scenarios.probabilities)
    if probabilities is None:
        raise TypeError(
            "bare return matrices need probabilities=; "
            "or pass a scenario container"
        )
    return np.asarray(scenarios), np.asarray(probabilities)


def tail_index(
    scenarios,
    weights: np.ndarray,
    alpha: float,
    tie_rng: np.random.Generator | None = None,
    *,
    probabilities: np.ndarray | None = None,
) -> TailIndex:
    """Sort scenarios for ``weights`` and cut the tail at ``alpha``."""
    x, p = _arrays(scenarios, probabilities)
    order = scenario_order(x, weights, tie_rng)
    k, epsilon = tail_cut(p, order, alpha)
    return TailIndex(k=k, epsilon=epsilon, order=order, alpha=alpha)


# ---------------------------------------------------------------------------
# risk measures
# ---------------------------------------------------------------------------


def discrete_cvar(
    scenarios,
    weights: np.ndarray,
    alpha: float,
    index: TailIndex | None = None,
    *,
    probabilities: np.ndarray | None = None,
) -> float:
    """Average portfolio return over the worst alpha probability mass.

    Pass a precomputed ``index`` to reuse one sort across several levels;
    its order must come from the same (returns, weights) pair.
    """
    x, p = _arrays(scenarios, probabilities)
    if index is None:
        index = tail_index(x, weights, alpha, probabilities=p)
    r = x @ np.asarray(weights)
    inside = index.order[: index.k]
    boundary = index.order[index.k]
    return float((p[inside] @ r[inside] + index.epsilon * r[boundary]) / alpha)


def discrete_var(
    scenarios,
    weights: np.ndarray,
    alpha: float,
    index: TailIndex | None = None,
    *,
    probabilities: np.ndarray | None = None,
) -> float:
    """Level-alpha quantile of portfolio returns: the boundary scenario's value."""
    x, p = _arrays(scenarios, probabilities)
    if index is None:
        index = tail_index(x, weights, alpha, probabilities=p)
    r = x @ np.asarray(weights)
    return float(r[index.order[index.k]])


def cvar_supergradient(
    scenarios,
    weights: np.ndarray,
    alpha: float,
    index: TailIndex | None = None,
    *,
    probabilities: np.ndarray | None = None,
) -> np.ndarray:
    """One supergradient of the concave map w -> CVaR_alpha(w).

    Weighted sum of tail scenario rows plus the epsilon share of the
    boundary row, all divided by alpha.  Any tie resolution baked into
    ``index.order`` yields a valid element.
    """
    x, p = _arrays(scenarios, probabilities)
    if index is None:
        index = tail_index(x, weights, alpha, probabilities=p)
    inside = index.order[: index.k]
    boundary = index.order[index.k]
    grad = p[inside] @ x[inside] if index.k > 0 else np.zeros(x.shape[1])
    return (grad + index.epsilon * x[boundary]) / alpha


def ru_cvar(
    scenarios,
    weights: np.ndarray,
    alpha: float,
    *,
    probabilities: np.ndarray | None = None,
) -> float:
    """Threshold-maximization oracle for the discrete CVaR.

    Maximizes a - (1/alpha) * sum_j p_j * max(a - r_j, 0) over candidate
    thresholds a.  For a discrete distribution the maximum is attained at
    one of the realized portfolio returns, so scanning those is exact.
    Quadratic in S; intended as an independent cross-check.
    """
    x, p = _arrays(scenarios, probabilities)
    r = x @ np.asarray(weights)
    shortfall = np.maximum(r[:, None] - r[None, :], 0.0) @ p
    return float(np.max(r - shortfall / alpha))


def default_gamma(probabilities, alpha: float) -> float:
    """Half the weight-independent tail remainder, for uniform probabilities.

    With uniform probabilities the cumulative mass of any k sorted
    scenarios is k/S regardless of the sort, so epsilon does not depend on
    the weights and gamma = epsilon/2 is well defined up front.  Non-uniform
    probabilities make epsilon order-dependent; callers must then choose
    gamma explicitly.  Accepts a probability vector or a scenario container.
    """
    if hasattr(probabilities, "probabilities"):
        probabilities = probabilities.probabilities
    p = np.asarray(probabilities, dtype=float)
    if p.size == 0:
        raise ValueError("empty probability vector")
    if not np.all(np.abs(p - p[0]) <= 1e-12):
        raise ValueError(
            "default gamma requires uniform probabilities; pass gamma explicitly"
        )
    k, epsilon = tail_cut(p, np.arange(p.size), alpha)
    return epsilon / 2.0
