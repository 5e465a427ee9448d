"""Scenario data: containers, CSV ingestion, summaries, synthetic generation.

File format: comma-separated, one header row of asset labels, then one row
per weekly scenario of gross returns (1.0 = flat week).  The loader assigns
uniform scenario probabilities; the in-memory API accepts non-uniform ones.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import risk

__all__ = [
    "DataError",
    "DatasetReadError",
    "ValidationError",
    "ScenarioSet",
    "SummaryStats",
    "SyntheticSpec",
    "STAT_COLUMNS",
    "QUANTILE_ROWS",
    "load_scenarios",
    "write_scenarios_csv",
    "summary_stats",
    "write_stats_csv",
    "read_stats_csv",
    "generate_synthetic",
    "portfolio_returns",
    "check_simplex",
]


class DataError(ValueError):
    """Base class for data-layer failures."""


class DatasetReadError(DataError):
    """A dataset file is missing, unreadable, or malformed."""


class ValidationError(DataError):
    """Semantically invalid inputs (bad covariance, off-simplex weights, ...)."""


# ---------------------------------------------------------------------------
# containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioSet:
    """An (S, n) gross-return matrix with scenario probabilities.

    Entries must be finite; probabilities must be nonnegative and sum to
    one within 1e-12.  Strict positivity of returns is an ingestion rule
    enforced by the CSV loader, not by this container, so seeded synthetic
    instances keep their exact sampling distribution.
    """

    returns: np.ndarray
    probabilities: np.ndarray
    asset_names: tuple[str, ...]
    source_id: str

    def __post_init__(self) -> None:
        x = np.ascontiguousarray(np.asarray(self.returns, dtype=float))
        p = np.ascontiguousarray(np.asarray(self.probabilities, dtype=float))
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise ValidationError(f"returns must be a nonempty 2-d matrix, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValidationError("returns contain non-finite entries")
        if p.ndim != 1 or p.shape[0] != x.shape[0]:
            raise ValidationError(
                f"probabilities shape {p.shape} does not match {x.shape[0]} scenarios"
            )
        if np.any(p < 0.0):
            raise ValidationError("probabilities must be nonnegative")
        if abs(float(p.sum()) - 1.0) > 1e-12:
            raise ValidationError(f"probabilities sum to {p.sum()!r}, not 1")
        if len(self.asset_names) != x.shape[1]:
            raise ValidationError(
                f"{len(self.asset_names)} asset names for {x.shape[1]} assets"
            )
        object.__setattr__(self, "returns", x)
        object.__setattr__(self, "probabilities", p)
        object.__setattr__(self, "asset_names", tuple(str(a) for a in self.asset_names))

    @property
    def scenario_count(self) -> int:
        return self.returns.shape[0]

    @property
    def asset_count(self) -> int:
        return self.returns.shape[1]


STAT_COLUMNS = ("mu", "sigma", "var", "cvar", "skew", "kurt")
QUANTILE_ROWS = ("min", "q25", "q50", "q75", "max")


@dataclass(frozen=True)
class SummaryStats:
    """Per-asset summary statistics plus their cross-asset quantile block.

    Column order follows STAT_COLUMNS; ``quantiles`` holds the rows of
    QUANTILE_ROWS over those columns.  Undefined moments (constant asset)
    are NaN in memory and the literal string ``undefined`` on disk.
    """

    asset_names: tuple[str, ...]
    mu: np.ndarray
    sigma: np.ndarray
    var: np.ndarray
    cvar: np.ndarray
    skew: np.ndarray
    kurt: np.ndarray
    quantiles: np.ndarray
    alpha: float

    def column(self, name: str) -> np.ndarray:
        if name not in STAT_COLUMNS:
            raise KeyError(name)
        return getattr(self, name)


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a seeded multivariate-normal scenario draw.

    Covariance must be symmetric within 1e-12 with eigenvalues above
    -1e-10; the seed is a 64-bit integer so runs are reproducible
    bit for bit.
    """

    mean: np.ndarray
    covariance: np.ndarray
    scenario_count: int
    seed: int

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.covariance, dtype=float)
        if mean.ndim != 1 or mean.size < 1 or not np.all(np.isfinite(mean)):
            raise ValidationError("mean must be a finite 1-d vector")
        if cov.shape != (mean.size, mean.size):
            raise ValidationError(
                f"covariance shape {cov.shape} does not match {mean.size} assets"
            )
        if not np.all(np.isfinite(cov)):
            raise ValidationError("covariance contains non-finite entries")
        if np.max(np.abs(cov - cov.T)) > 1e-12:
            raise ValidationError("covariance must be symmetric within 1e-12")
        min_eig = float(np.linalg.eigvalsh((cov + cov.T) / 2.0).min())
        if min_eig < -1e-10:
            raise ValidationError(
                f"covariance is not positive semidefinite (min eigenvalue {min_eig:.3e})"
            )
        if self.scenario_count < 1:
            raise ValidationError("scenario_count must be at least 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed must fit in 64 unsigned bits")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)


# ---------------------------------------------------------------------------
# ingestion and emission
# ---------------------------------------------------------------------------


def load_scenarios(path: str | Path) -> ScenarioSet:
    """Read a gross-return CSV into a ScenarioSet with uniform probabilities.

    Raises DatasetReadError with the offending row index for malformed
    width, non-numeric, or non-positive entries; source_id is the file
    stem.
    """
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DatasetReadError(f"{path}: file is empty") from None
            names = [c.strip() for c in header]
            if not names or any(not c for c in names):
                raise DatasetReadError(f"{path}: header row must name every asset column")
            rows: list[list[float]] = []
            for i, row in enumerate(reader, start=1):
                if len(row) != len(names):
                    raise DatasetReadError(
                        f"{path}: row {i}: expected {len(names)} fields, got {len(row)}"
                    )
                values = []
                for name, cell in zip(names, row):
                    try:
                        v = float(cell)
                    except ValueError:
                        raise DatasetReadError(
                            f"{path}: row {i}, column {name}: {cell!r} is not a number"
                        ) from None
                    if not np.isfinite(v) or v <= 0.0:
                        raise DatasetReadError(
                            f"{path}: row {i}, column {name}: gross return must be a "
                            f"finite positive number, got {cell!r}"
                        )
                    values.append(v)
                rows.append(values)
    except OSError as exc:
        raise DatasetReadError(f"{path}: {exc.strerror or exc}") from exc
    if not rows:
        raise DatasetReadError(f"{path}: no scenario rows after the header")
    x = np.array(rows, dtype=float)
    s = x.shape[0]
    return ScenarioSet(
        returns=x,
        probabilities=np.full(s, 1.0 / s),
        asset_names=tuple(names),
        source_id=path.stem,
    )


def write_scenarios_csv(scenarios: ScenarioSet, path: str | Path) -> None:
    """Emit the loader's format; %.17g keeps the round trip bit-exact."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(scenarios.asset_names)
        for row in scenarios.returns:
            writer.writerow([format(v, ".17g") for v in row])


# ---------------------------------------------------------------------------
# summary statistics
# ---------------------------------------------------------------------------


def summary_stats(scenarios: ScenarioSet, alpha: float = 0.05) -> SummaryStats:
    """Per-asset moments and tail measures, with cross-asset quantile rows.

    mu/sigma/skew/kurt are probability-weighted; kurt is the plain fourth
    standardized moment (3.0 for a normal).  VaR and CVaR come from the
    risk module evaluated on single-asset weight vectors.  Quantile rows
    use linear interpolation between order statistics over assets.
    """
    x = scenarios.returns
    p = scenarios.probabilities
    n = scenarios.asset_count
    mu = p @ x
    centered = x - mu
    sigma = np.sqrt(p @ centered**2)
    with np.errstate(divide="ignore", invalid="ignore"):
        skew = np.where(sigma > 0.0, (p @ centered**3) / sigma**3, np.nan)
        kurt = np.where(sigma > 0.0, (p @ centered**4) / sigma**4, np.nan)
    var = np.empty(n)
    cvar = np.empty(n)
    for i in range(n):
        e_i = np.zeros(n)
        e_i[i] = 1.0
        idx = risk.tail_index(x, e_i, alpha, probabilities=p)
        var[i] = risk.discrete_var(x, e_i, alpha, idx, probabilities=p)
        cvar[i] = risk.discrete_cvar(x, e_i, alpha, idx, probabilities=p)
    columns = {"mu": mu, "sigma": sigma, "var": var, "cvar": cvar, "skew": skew, "kurt": kurt}
    quantiles = np.empty((len(QUANTILE_ROWS), len(STAT_COLUMNS)))
    for j, name in enumerate(STAT_COLUMNS):
        v = columns[name]
        quantiles[:, j] = [
            np.min(v),
            np.quantile(v, 0.25),
            np.quantile(v, 0.50),
            np.quantile(v, 0.75),
            np.max(v),
        ]
    return SummaryStats(
        asset_names=scenarios.asset_names,
        mu=mu,
        sigma=sigma,
        var=var,
        cvar=cvar,
        skew=skew,
        kurt=kurt,
        quantiles=quantiles,
        alpha=alpha,
    )


_UNDEFINED = "undefined"


def _format_stat(v: float) -> str:
    return _UNDEFINED if not np.isfinite(v) else format(v, ".17g")


def _parse_stat(cell: str) -> float:
    return np.nan if cell == _UNDEFINED else float(cell)


def write_stats_csv(stats: SummaryStats, path: str | Path) -> None:
    """Per-asset rows, then the five cross-asset quantile rows."""
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("asset",) + STAT_COLUMNS)
        for i, name in enumerate(stats.asset_names):
            writer.writerow(
                [name] + [_format_stat(stats.column(c)[i]) for c in STAT_COLUMNS]
            )
        for r, label in enumerate(QUANTILE_ROWS):
            writer.writerow([label] + [_format_stat(v) for v in stats.quantiles[r]])


def read_stats_csv(path: str | Path) -> SummaryStats:
    """Parse write_stats_csv output back; alpha is not stored, so NaN."""
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DatasetReadError(f"{path}: {exc.strerror or exc}") from exc
    if not rows or tuple(rows[0]) != ("asset",) + STAT_COLUMNS:
        raise DatasetReadError(f"{path}: not a stats CSV (bad header)")
    body = rows[1:]
    if len(body) < len(QUANTILE_ROWS):
        raise DatasetReadError(f"{path}: missing quantile block")
    asset_rows = body[: -len(QUANTILE_ROWS)]
    quant_rows = body[-len(QUANTILE_ROWS):]
    if [r[0] for r in quant_rows] != list(QUANTILE_ROWS):
        raise DatasetReadError(f"{path}: quantile block rows out of order")
    names = tuple(r[0] for r in asset_rows)
    cols = {
        c: np.array([_parse_stat(r[1 + j]) for r in asset_rows])
        for j, c in enumerate(STAT_COLUMNS)
    }
    quantiles = np.array([[_parse_stat(cell) for cell in r[1:]] for r in quant_rows])
    return SummaryStats(
        asset_names=names, quantiles=quantiles, alpha=np.nan, **cols
    )


# ---------------------------------------------------------------------------
# synthetic scenarios and portfolio evaluation
# ---------------------------------------------------------------------------


def generate_synthetic(spec: SyntheticSpec) -> ScenarioSet:
    """Seeded multivariate-normal draw; identical seed, identical bits.

    The SVD sampling path accepts semidefinite covariances (a zero matrix
    reproduces the mean in every scenario).
    """
    rng = np.random.default_rng(spec.seed)
    cov = (spec.covariance + spec.covariance.T) / 2.0
    x = rng.multivariate_normal(
        spec.mean, cov, size=spec.scenario_count, method="svd", check_valid="ignore"
    )
    s = spec.scenario_count
    return ScenarioSet(
        returns=x,
        probabilities=np.full(s, 1.0 / s),
        asset_names=tuple(f"A{i + 1}" for i in range(spec.mean.size)),
        source_id=f"synthetic-seed{spec.seed}",
    )


def check_simplex(weights: np.ndarray, n: int, tol: float = 1e-9) -> np.ndarray:
    """Validate a weight vector against the n-simplex within tol."""
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise ValidationError(f"weights shape {w.shape} does not match {n} assets")
    if not np.all(np.isfinite(w)):
        raise ValidationError("weights contain non-finite entries")
    if abs(float(w.sum()) - 1.0) > tol or float(w.min()) < -tol:
        raise ValidationError(
            f"weights leave the simplex (sum {w.sum()!r}, min {w.min()!r}, tol {tol})"
        )
    return w


def portfolio_returns(scenarios: ScenarioSet, weights: np.ndarray) -> np.ndarray:
    """Scenario-wise portfolio returns X @ w for simplex weights."""
    w = check_simplex(weights, scenarios.asset_count)
    return scenarios.returns @ w
