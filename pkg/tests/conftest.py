import numpy as np
import pytest

from dcvar.data import SyntheticSpec, generate_synthetic
from dcvar.objective import ProblemSpec

# 3-asset instance used throughout: unit-variance correlated normals give
# deep negative tails, and the floor sits between the second-highest and
# highest single-asset quantiles so exactly one vertex is feasible
TOY_MEAN = np.array([1.05, 1.03, 1.055])
TOY_COV = np.array(
    [
        [1.0, 0.7, 0.3],
        [0.7, 1.0, 0.4],
        [0.3, 0.4, 1.0],
    ]
)
TOY_SCENARIOS = 2000
TOY_SEED = 20260822
TOY_R_MIN = -0.6375
TOY_TAU = 1.0
TOY_RHO = 0.03


@pytest.fixture(scope="session")
def toy_scenarios():
    spec = SyntheticSpec(
        mean=TOY_MEAN,
        covariance=TOY_COV,
        scenario_count=TOY_SCENARIOS,
        seed=TOY_SEED,
    )
    return generate_synthetic(spec)


@pytest.fixture(scope="session")
def toy_spec(toy_scenarios):
    return ProblemSpec(
        scenarios=toy_scenarios,
        alpha=0.05,
        r_min=TOY_R_MIN,
        tau=TOY_TAU,
        rho=TOY_RHO,
    )


@pytest.fixture(scope="session")
def mild_scenarios():
    # gross-return scale (3% weekly vol), for tests that need r_min near 0.97
    spec = SyntheticSpec(
        mean=TOY_MEAN,
        covariance=0.0009 * TOY_COV,
        scenario_count=500,
        seed=7,
    )
    return generate_synthetic(spec)
