"""Penalized portfolio objective and its convex split.

The problem is: maximize expected scenario return over the simplex subject
to a floor on the level-alpha VaR.  The floor enters as an exact penalty,

    phi(w) = f(w) + tau * max(r_min - VaR_alpha(w), 0),
    f(w)   = -sum_j p_j * (x_j @ w),

and phi decomposes as a difference of convex functions phi = g - h with

    g(w) = psi(w) + f(w)
         + tau * max(-(alpha/gamma) CVaR_alpha(w) + r_min,
                     -((alpha-gamma)/gamma) CVaR_{alpha-gamma}(w))
    h(w) = psi(w) - tau * ((alpha-gamma)/gamma) * CVaR_{alpha-gamma}(w)
    psi  = (rho/2) ||w||^2

using the two-level CVaR identity for VaR.  Both CVaR levels share one
scenario sort per evaluation point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import risk
from .data import ScenarioSet, ValidationError, check_simplex
from .risk import DCLevels, TailIndex

__all__ = [
    "ProblemSpec",
    "ObjectiveValue",
    "empirical_loss",
    "phi",
    "g_value",
    "h_value",
    "h_subgradient",
    "g_subgradient",
    "feasibility_check",
]


@dataclass(frozen=True)
class ProblemSpec:
    """One penalized instance: data plus (alpha, gamma, r_min, tau, rho).

    gamma=None resolves to half the uniform tail remainder; rho=None to
    0.01 * asset count.  tau and rho here are the static values; solvers
    running an adaptive strategy pass their own current values to the
    evaluation functions instead.
    """

    scenarios: ScenarioSet
    alpha: float = 0.05
    gamma: float | None = None
    r_min: float = 0.97
    tau: float = 0.01
    rho: float | None = None
    feas_tol: float = 1e-6

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.gamma is None:
            object.__setattr__(
                self, "gamma", risk.default_gamma(self.scenarios.probabilities, self.alpha)
            )
        if not 0.0 < self.gamma < self.alpha:
            raise ValidationError(
                f"gamma must lie in (0, alpha); got gamma={self.gamma}, alpha={self.alpha}"
            )
        if self.rho is None:
            object.__setattr__(self, "rho", 0.01 * self.scenarios.asset_count)
        if not self.tau > 0.0:
            raise ValidationError(f"tau must be positive, got {self.tau}")
        if not self.rho > 0.0:
            raise ValidationError(f"rho must be positive, got {self.rho}")
        if not np.isfinite(self.r_min):
            raise ValidationError(f"r_min must be finite, got {self.r_min}")
        if not self.feas_tol >= 0.0:
            raise ValidationError(f"feas_tol must be nonnegative, got {self.feas_tol}")

    @property
    def levels(self) -> DCLevels:
        return DCLevels(alpha=self.alpha, gamma=self.gamma)

    @property
    def asset_count(self) -> int:
        return self.scenarios.asset_count


@dataclass(frozen=True)
class ObjectiveValue:
    """phi broken into its two ingredients plus the feasibility verdict."""

    expected_return_term: float
    penalty_term: float
    phi: float
    feasible: bool


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def _tails(
    spec: ProblemSpec,
    weights: np.ndarray,
    tie_rng: np.random.Generator | None = None,
) -> tuple[TailIndex, TailIndex]:
    """TailIndex at alpha and alpha-gamma from one shared scenario sort."""
    s = spec.scenarios
    order = risk.scenario_order(s.returns, weights, tie_rng)
    k1, e1 = risk.tail_cut(s.probabilities, order, spec.alpha)
    k2, e2 = risk.tail_cut(s.probabilities, order, spec.alpha - spec.gamma)
    return (
        TailIndex(k=k1, epsilon=e1, order=order, alpha=spec.alpha),
        TailIndex(k=k2, epsilon=e2, order=order, alpha=spec.alpha - spec.gamma),
    )


def empirical_loss(spec: ProblemSpec, weights: np.ndarray) -> float:
    """f(w): negated probability-weighted expected portfolio return."""
    w = check_simplex(weights, spec.asset_count)
    s = spec.scenarios
    return float(-(s.probabilities @ (s.returns @ w)))


def phi(spec: ProblemSpec, weights: np.ndarray, tau: float | None = None) -> ObjectiveValue:
    """Penalized objective at ``weights`` (optionally under an override tau)."""
    tau = spec.tau if tau is None else tau
    w = check_simplex(weights, spec.asset_count)
    s = spec.scenarios
    f = float(-(s.probabilities @ (s.returns @ w)))
    var = risk.discrete_var(s, w, spec.alpha)
    penalty = max(spec.r_min - var, 0.0)
    return ObjectiveValue(
        expected_return_term=f,
        penalty_term=penalty,
        phi=f + tau * penalty,
        feasible=var >= spec.r_min - spec.feas_tol,
    )


def _cvar_pair(spec: ProblemSpec, weights: np.ndarray) -> tuple[float, float, TailIndex, TailIndex]:
    s = spec.scenarios
    t1, t2 = _tails(spec, weights)
    c1 = risk.discrete_cvar(s, weights, spec.alpha, t1)
    c2 = risk.discrete_cvar(s, weights, t2.alpha, t2)
    return c1, c2, t1, t2


def g_value(
    spec: ProblemSpec,
    weights: np.ndarray,
    tau: float | None = None,
    rho: float | None = None,
) -> float:
    """Convex part of the split at ``weights``."""
    tau = spec.tau if tau is None else tau
    rho = spec.rho if rho is None else rho
    w = check_simplex(weights, spec.asset_count)
    c1, c2, _, _ = _cvar_pair(spec, w)
    a, gm = spec.alpha, spec.gamma
    hinge = max(-(a / gm) * c1 + spec.r_min, -((a - gm) / gm) * c2)
    f = float(-(spec.scenarios.probabilities @ (spec.scenarios.returns @ w)))
    return 0.5 * rho * float(w @ w) + f + tau * hinge


def h_value(
    spec: ProblemSpec,
    weights: np.ndarray,
    tau: float | None = None,
    rho: float | None = None,
) -> float:
    """Concave-remainder part of the split at ``weights``."""
    tau = spec.tau if tau is None else tau
    rho = spec.rho if rho is None else rho
    w = check_simplex(weights, spec.asset_count)
    s = spec.scenarios
    t2 = risk.tail_index(s, w, spec.alpha - spec.gamma)
    c2 = risk.discrete_cvar(s, w, t2.alpha, t2)
    return 0.5 * rho * float(w @ w) - tau * ((spec.alpha - spec.gamma) / spec.gamma) * c2


def h_subgradient(
    spec: ProblemSpec,
    weights: np.ndarray,
    rng_seed: int | None = None,
    tau: float | None = None,
    rho: float | None = None,
) -> np.ndarray:
    """One element of the subdifferential of h at ``weights``.

    rho*w minus tau*((alpha-gamma)/gamma) times a supergradient of the
    shifted-level CVaR.  With rng_seed, tied scenario blocks are shuffled
    before the tail cut, which is how a random subdifferential element is
    drawn; the result is deterministic in rng_seed.
    """
    tau = spec.tau if tau is None else tau
    rho = spec.rho if rho is None else rho
    w = check_simplex(weights, spec.asset_count)
    s = spec.scenarios
    tie_rng = None if rng_seed is None else np.random.default_rng(rng_seed)
    t2 = risk.tail_index(s, w, spec.alpha - spec.gamma, tie_rng)
    grad = risk.cvar_supergradient(s, w, t2.alpha, t2)
    return rho * w - tau * ((spec.alpha - spec.gamma) / spec.gamma) * grad


def g_subgradient(
    spec: ProblemSpec,
    weights: np.ndarray,
    tau: float | None = None,
    rho: float | None = None,
) -> np.ndarray:
    """One element of the subdifferential of g at ``weights``.

    The hinge in g is -tau times the concave minimum of
    (alpha/gamma) CVaR_alpha - r_min  and
    ((alpha-gamma)/gamma) CVaR_{alpha-gamma};
    whichever branch attains the minimum supplies the scaled CVaR
    supergradient.  On exact equality (the VaR floor met exactly) the
    midpoint of the two branch elements is returned.
    """
    tau = spec.tau if tau is None else tau
    rho = spec.rho if rho is None else rho
    w = check_simplex(weights, spec.asset_count)
    s = spec.scenarios
    c1, c2, t1, t2 = _cvar_pair(spec, w)
    a, gm = spec.alpha, spec.gamma
    b1 = (a / gm) * c1 - spec.r_min
    b2 = ((a - gm) / gm) * c2
    grad1 = (a / gm) * risk.cvar_supergradient(s, w, a, t1)
    grad2 = ((a - gm) / gm) * risk.cvar_supergradient(s, w, t2.alpha, t2)
    if b1 < b2:
        zeta = grad1
    elif b1 > b2:
        zeta = grad2
    else:
        zeta = 0.5 * (grad1 + grad2)
    f_grad = -(s.probabilities @ s.returns)
    return rho * w + f_grad - tau * zeta


def feasibility_check(spec: ProblemSpec, weights: np.ndarray, feas_tol: float | None = None) -> bool:
    """VaR_alpha(weights) >= r_min - feas_tol."""
    tol = spec.feas_tol if feas_tol is None else feas_tol
    w = check_simplex(weights, spec.asset_count)
    s = spec.scenarios
    var = risk.discrete_var(s, w, spec.alpha)
    return var >= spec.r_min - tol
