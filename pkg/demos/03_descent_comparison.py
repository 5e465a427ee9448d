"""
Classical descent vs boosted descent
====================================

Both solvers repeat the same two moves: linearize the concave part of the
split at the current weights, then minimize the resulting convex model
over the simplex.  The classical iteration accepts the model's minimizer
as is.  The boosted iteration treats the move as a direction, starts a
backtracking line search at the largest step the simplex allows, and so
can travel several times farther per iteration.  On a noisy instance with
a weak floor the difference is stark.
"""

import numpy as np

from dcvar import ProblemSpec, SolverConfig, SyntheticSpec, generate_synthetic, solve

# high-noise toy: unit covariance around means barely 2% apart, 2000
# scenarios, and a floor so low it never binds
mean = np.array([1.05, 1.03, 1.055])
cov = np.array([[1.0, 0.7, 0.3], [0.7, 1.0, 0.4], [0.3, 0.4, 1.0]])
scen = generate_synthetic(SyntheticSpec(mean, cov, scenario_count=2000, seed=20260822))
spec = ProblemSpec(scenarios=scen, alpha=0.05, r_min=-0.6375, tau=1.0, rho=0.03)

w0 = np.array([0.6, 0.3, 0.1])

results = {}
for algorithm in ("dca", "bdca"):
    cfg = SolverConfig(algorithm=algorithm, stop_criterion="dk_abs", stop_tol=1e-6)
    results[algorithm] = solve(spec, w0, cfg)

for algorithm, res in results.items():
    print("%s: %d iterations, phi = %.6f, reason = %s" % (algorithm, res.iterations, res.phi, res.termination_reason))
    print("   terminal weights", np.round(res.weights, 4))
print()

# the first few rows of each trace; step is the accepted line-search
# multiple (always 1 for the classical iteration)
print("iter   dca phi        dca |d|     bdca phi       bdca |d|    bdca step")
rows = max(results["dca"].iterations, results["bdca"].iterations)
for i in range(min(rows, 8)):
    cells = ["%4d" % i]
    for algorithm in ("dca", "bdca"):
        tr = results[algorithm].trace
        if i < len(tr):
            cells.append("%12.6f  %10.2e" % (tr[i].phi, tr[i].step_norm))
        else:
            cells.append(" " * 12 + "  " + " " * 10)
        if algorithm == "bdca":
            cells.append("%7.2f" % tr[i].step_size if i < len(tr) else "")
    print("  ".join(cells))
print()

boosted = [t.step_size for t in results["bdca"].trace if t.step_size > 1.0]
print("boosted steps with multiple > 1: %d of %d, largest %.1f" % (
    len(boosted), results["bdca"].iterations, max(boosted) if boosted else float("nan")))
print("certified stationarity residual, bdca: %.1e" % results["bdca"].kkt_residual)

# same final basin, very different path lengths
gap = abs(results["dca"].phi - results["bdca"].phi)
print("final objective gap between the two solvers: %.2e" % gap)
