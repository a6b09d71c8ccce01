"""Population time series and the modified stochastic Ricker/Gompertz models.

Models:
1) Ricker   - R_i = a + b n_i      + sum c_j V_j + eps
2) Gompertz - R_i = a + b ln(n_i)  + sum c_j V_j + eps
3) Null     - R_i = a + eps

where R_i = ln(n_{i+1} / n_i) is the relative population change and the
predictors are taken at the start year of each transition.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        __str__ = str.__str__
        __format__ = str.__format__
from typing import Iterable, Mapping

import numpy as np
from numpy.typing import ArrayLike
from scipy import stats as sps

from .exceptions import (
    AlignmentError,
    ConfigError,
    DataError,
    GapError,
    NonPositiveCount,
    NumericalError,
    TooFewRows,
    UnknownCovariate,
)
from .rng import substream
from .stats import DesignMatrix, FittedModel

logger = logging.getLogger(__name__)

DEFAULT_FORECAST_SAMPLES = 10_000
# samples per random substream; fixed so chunking never depends on thread count
FORECAST_CHUNK = 4096
# name usable in interactions for the (family-transformed) density term
DENSITY = "density"


class Family(StrEnum):
    RICKER = "ricker"
    GOMPERTZ = "gompertz"
    NULL = "null"


# ---------- data ----------

@dataclass(frozen=True, eq=False)
class TimeSeriesDataset:
    """Annual counts with named covariate series aligned to the same years."""

    years: np.ndarray
    counts: np.ndarray
    covariates: Mapping[str, np.ndarray] = field(default_factory=dict)
    excluded_years: frozenset = frozenset()

    def __post_init__(self):
        years = np.asarray(self.years)
        if years.ndim != 1 or years.size == 0:
            raise DataError("years must be a non-empty vector")
        if not np.all(np.equal(np.mod(years, 1), 0)):
            raise DataError("years must be integers")
        years = years.astype(int)
        counts = np.asarray(self.counts, dtype=float)
        if counts.shape != years.shape:
            raise AlignmentError(f"{years.size} years but {counts.size} counts")
        if np.any(np.diff(years) != 1):
            gap = int(np.flatnonzero(np.diff(years) != 1)[0])
            raise GapError(f"years are not consecutive after {years[gap]}")
        _check_counts(counts)
        covariates = {}
        for name, series in self.covariates.items():
            series = np.asarray(series, dtype=float)
            if series.shape != years.shape:
                raise AlignmentError(
                    f"covariate '{name}' has {series.size} values for {years.size} years"
                )
            series.setflags(write=False)
            covariates[name] = series
        years.setflags(write=False)
        counts.setflags(write=False)
        object.__setattr__(self, "years", years)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "covariates", covariates)
        object.__setattr__(self, "excluded_years", frozenset(int(y) for y in self.excluded_years))

    @property
    def n_years(self) -> int:
        return self.years.size

    @property
    def covariate_names(self) -> list[str]:
        return list(self.covariates)

    def exclude(self, years: Iterable[int]) -> "TimeSeriesDataset":
        """Copy with extra years excluded; transitions touching them are dropped."""
        years = {int(y) for y in years}
        unknown = years - set(self.years.tolist())
        if unknown:
            raise DataError(f"cannot exclude years outside the series: {sorted(unknown)}")
        return replace(self, excluded_years=self.excluded_years | years)

    def transition_mask(self) -> np.ndarray:
        """Boolean mask over the n-1 transitions: neither end year is excluded."""
        if not self.excluded_years:
            return np.ones(self.n_years - 1, dtype=bool)
        keep = ~np.isin(self.years, list(self.excluded_years))
        return keep[:-1] & keep[1:]

    def transition_years(self) -> np.ndarray:
        """Start year of every used transition."""
        return self.years[:-1][self.transition_mask()]


def _check_counts(counts: np.ndarray) -> None:
    if not np.all(np.isfinite(counts)):
        raise DataError("counts contain missing or non-finite values")
    if np.any(counts <= 0):
        raise NonPositiveCount(f"counts must be positive, found {counts[counts <= 0][0]:g}")


# ---------- model specification ----------

@dataclass(frozen=True)
class ModelSpec:
    """One candidate model: family plus the predictors it uses."""

    family: Family
    covariate_names: tuple[str, ...] = ()
    interactions: tuple[tuple[str, str], ...] = ()
    include_density: bool = False
    label: str = ""
    k_override: int | None = None

    def __post_init__(self):
        try:
            family = Family(self.family)
        except ValueError:
            raise ConfigError(f"unknown model family '{self.family}'") from None
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "covariate_names", tuple(self.covariate_names))
        pairs = tuple(tuple(pair) for pair in self.interactions)
        if any(len(pair) != 2 for pair in pairs):
            raise ConfigError("interactions must be pairs of series names")
        object.__setattr__(self, "interactions", pairs)
        if family is Family.NULL and (self.covariate_names or pairs or self.include_density):
            raise ConfigError("the null model takes no covariates, interactions or density term")
        if len(set(self.covariate_names)) != len(self.covariate_names):
            raise ConfigError(f"duplicate covariates in model '{self.model_id}'")
        if DENSITY in self.covariate_names:
            raise ConfigError(f"'{DENSITY}' is reserved; use include_density instead")
        if self.k_override is not None and self.k_override < 1:
            raise ConfigError("k_override must be at least 1")

    @classmethod
    def null(cls, label: str = "M0") -> "ModelSpec":
        return cls(Family.NULL, label=label)

    @property
    def is_null(self) -> bool:
        return self.family is Family.NULL

    @property
    def model_id(self) -> str:
        return self.label or self.describe()

    def describe(self) -> str:
        terms = []
        if self.include_density:
            terms.append(DENSITY)
        terms.extend(self.covariate_names)
        terms.extend(f"{a}:{b}" for a, b in self.interactions)
        return f"{self.family.value}({' + '.join(terms)})"

    def required_covariates(self) -> list[str]:
        """Dataset covariates this model reads, in first-use order."""
        names = list(self.covariate_names)
        for pair in self.interactions:
            names.extend(n for n in pair if n != DENSITY and n not in names)
        return names


# ---------- design construction ----------

def relative_change(series: "TimeSeriesDataset | ArrayLike") -> np.ndarray:
    """R_i = ln(n_{i+1} / n_i) over consecutive counts."""
    counts = series.counts if isinstance(series, TimeSeriesDataset) else np.asarray(series, dtype=float)
    if counts.ndim != 1 or counts.size < 2:
        raise TooFewRows("relative change needs at least two counts")
    _check_counts(counts)
    return np.diff(np.log(counts))


def _density_series(spec: ModelSpec, dataset: TimeSeriesDataset) -> np.ndarray:
    if spec.family is Family.GOMPERTZ:
        return np.log(dataset.counts)
    return dataset.counts


def _series(name: str, spec: ModelSpec, dataset: TimeSeriesDataset) -> np.ndarray:
    if name == DENSITY:
        return _density_series(spec, dataset)
    try:
        series = dataset.covariates[name]
    except KeyError:
        raise UnknownCovariate(
            f"model '{spec.model_id}' uses unknown covariate '{name}'"
        ) from None
    return series


def _predictor_columns(spec: ModelSpec, dataset: TimeSeriesDataset):
    """Full-length predictor columns (one value per year) and their names."""
    columns = [np.ones(dataset.n_years)]
    names = ["intercept"]
    if spec.include_density:
        columns.append(_density_series(spec, dataset))
        names.append(DENSITY if spec.family is Family.RICKER else f"log_{DENSITY}")
    for name in spec.covariate_names:
        columns.append(_series(name, spec, dataset))
        names.append(name)
    for a, b in spec.interactions:
        columns.append(_series(a, spec, dataset) * _series(b, spec, dataset))
        names.append(f"{a}:{b}")
    return np.column_stack(columns), tuple(names)


def build_design(spec: ModelSpec, dataset: TimeSeriesDataset) -> tuple[DesignMatrix, np.ndarray]:
    """Design matrix and response R for one model.

    Row i pairs R_i with the predictors of year i (start of the transition).
    Transitions touching an excluded year are dropped.
    """
    if dataset.n_years < 2:
        raise TooFewRows("a design needs at least two years")
    matrix, names = _predictor_columns(spec, dataset)
    mask = dataset.transition_mask()
    rows = matrix[:-1][mask]
    if not np.all(np.isfinite(rows)):
        bad = dataset.transition_years()[~np.all(np.isfinite(rows), axis=1)]
        raise DataError(f"missing covariate values for model '{spec.model_id}' in years {bad.tolist()}")
    response = relative_change(dataset)[mask]
    if response.size == 0:
        raise TooFewRows("no transitions left after exclusions")
    return DesignMatrix(rows, names=names), response


def predictor_row(spec: ModelSpec, dataset: TimeSeriesDataset, year: int) -> np.ndarray:
    """Predictors at any year, including the final one that has no response yet."""
    index = np.flatnonzero(dataset.years == year)
    if index.size == 0:
        raise DataError(f"year {year} is not in the dataset")
    matrix, _ = _predictor_columns(spec, dataset)
    row = matrix[index[0]]
    if not np.all(np.isfinite(row)):
        raise DataError(f"missing covariate values in year {year}")
    return row


def transition_origins(dataset: TimeSeriesDataset) -> np.ndarray:
    """Count at the start of every used transition."""
    return dataset.counts[:-1][dataset.transition_mask()]


# ---------- forecasting ----------

@dataclass(frozen=True, eq=False)
class PopulationForecast:
    """Monte-Carlo sample of next-year counts and its KDE bandwidth."""

    samples: np.ndarray
    kde_bandwidth: float
    origin_count: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1 or samples.size < 1:
            raise NumericalError("a forecast needs at least one sample")
        if np.any(samples <= 0) or not np.all(np.isfinite(samples)):
            raise NumericalError("forecast samples must be positive and finite")
        if not self.kde_bandwidth > 0:
            raise NumericalError(f"KDE bandwidth must be positive, got {self.kde_bandwidth}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def size(self) -> int:
        return self.samples.size

    def quantiles(self, q: ArrayLike) -> np.ndarray:
        return np.quantile(self.samples, q)


def silverman_bandwidth(samples: np.ndarray) -> float:
    """Silverman's rule h = 0.9 min(sd, IQR/1.34) S^(-1/5).

    Falls back to sd when the IQR vanishes, and to 1e-3 of the sample magnitude
    for a degenerate (single-valued) sample.
    """
    samples = np.asarray(samples, dtype=float)
    x_std = np.std(samples)
    q75, q25 = np.percentile(samples, [75, 25])
    a = min(x_std, (q75 - q25) / 1.34)
    if a <= 0:
        a = x_std
    if a <= 0:
        a = 1e-3 * max(abs(float(np.mean(samples))), 1.0)
    return 0.9 * a * samples.size ** (-0.2)


def standard_normals(size: int, seed: int, threads: int = 1) -> np.ndarray:
    """`size` N(0,1) draws from fixed-size chunks, each with its own substream."""
    if size < 1:
        raise ValueError("sample size must be at least 1")
    n_chunks = math.ceil(size / FORECAST_CHUNK)

    def draw(chunk: int) -> np.ndarray:
        count = min(FORECAST_CHUNK, size - chunk * FORECAST_CHUNK)
        return substream(seed, "forecast", chunk).standard_normal(count)

    if threads > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(draw, range(n_chunks)))
    else:
        parts = [draw(chunk) for chunk in range(n_chunks)]
    return np.concatenate(parts)


def forecast_from_moments(
    mean: float,
    sigma2: float,
    origin_count: float,
    normals: np.ndarray,
    bandwidth: float | None = None,
) -> PopulationForecast:
    """Counts origin * exp(mean + sigma Z) for pre-drawn standard normals Z."""
    if not origin_count > 0:
        raise NonPositiveCount(f"origin count must be positive, got {origin_count}")
    if sigma2 < 0:
        raise NumericalError("variance cannot be negative")
    samples = origin_count * np.exp(mean + math.sqrt(sigma2) * normals)
    h = silverman_bandwidth(samples) if bandwidth is None else bandwidth
    return PopulationForecast(samples=samples, kde_bandwidth=h, origin_count=origin_count)


def monte_carlo_forecast(
    fitted: FittedModel,
    predictor_row: ArrayLike,
    origin_count: float,
    S: int = DEFAULT_FORECAST_SAMPLES,
    seed: int = 0,
    *,
    bandwidth: float | None = None,
    sigma2: float | None = None,
    threads: int = 1,
) -> PopulationForecast:
    """Simulate next-year counts: origin * exp(R*), R* ~ N(row . beta, sigma2).

    `sigma2` overrides the fitted variance (zero gives a point forecast).
    Deterministic in `seed` whatever the thread count.
    """
    if S < 1:
        raise ValueError(f"S must be at least 1, got {S}")
    mean = fitted.predict(predictor_row)
    variance = fitted.sigma2 if sigma2 is None else sigma2
    normals = standard_normals(S, seed, threads=threads)
    logger.debug("forecast: mean R %.4f, variance %.4g, %d samples", mean, variance, S)
    return forecast_from_moments(mean, variance, origin_count, normals, bandwidth=bandwidth)


def kde_density(forecast: PopulationForecast, x: float) -> float:
    """Gaussian-kernel density estimate (1/(S h)) sum phi((x - s_j)/h)."""
    h = forecast.kde_bandwidth
    return float(np.sum(sps.norm.pdf((x - forecast.samples) / h)) / (forecast.size * h))
