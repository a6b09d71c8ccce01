"""Information criteria and the ignorance score.

Every statistic here is negatively oriented: smaller is better.
Likelihoods use natural logs; the ignorance score is in bits.
"""

import logging
import math
from dataclasses import dataclass, replace
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        __str__ = str.__str__
        __format__ = str.__format__
from typing import Callable, Sequence

import numpy as np
from django.conf import settings
from numpy.typing import ArrayLike
from scipy import stats as sps

from .exceptions import (
    FoldPerfectFit,
    FoldRankDeficient,
    PerfectFit,
    RankDeficient,
    SelectionError,
    SmallSample,
    TooFewRows,
    ZeroDensity,
)
from .popmodel import (
    DEFAULT_FORECAST_SAMPLES,
    ModelSpec,
    TimeSeriesDataset,
    build_design,
    forecast_from_moments,
    kde_density,
    transition_origins,
)
from .rng import substream
from .stats import (
    LEVERAGE_TOLERANCE,
    PERFECT_FIT_TOLERANCE,
    LeastSquaresFactor,
    as_response,
    gaussian_loglik,
    perfect_fit_mask,
)

logger = logging.getLogger(__name__)

_LN2 = math.log(2.0)
_EPS = np.finfo(float).eps


class StatisticKind(StrEnum):
    AIC = "aic"
    AICC = "aicc"
    CV_IGN = "cv-ign"

    @property
    def title(self) -> str:
        return {"aic": "AIC", "aicc": "AICc", "cv-ign": "Mean Ign"}[self.value]


class AiccConvention(StrEnum):
    STANDARD = "standard"    # AIC + 2K(K+1)/(n-K-1)
    DISPLAYED = "displayed"  # -2 ln L + 2K(K+1)/(n-K-1)


class ForecastScale(StrEnum):
    RELATIVE = "relative"  # Gaussian predictive density of R_i
    COUNT = "count"        # Monte-Carlo + KDE density of the next count


@dataclass(frozen=True)
class ScoringOptions:
    """Knobs shared by every statistic evaluation."""

    aicc_convention: AiccConvention = AiccConvention.STANDARD
    forecast_scale: ForecastScale = ForecastScale.RELATIVE
    forecast_samples: int = DEFAULT_FORECAST_SAMPLES
    kde_bandwidth: float | None = None
    seed: int = 0

    @classmethod
    def from_settings(cls, **overrides) -> "ScoringOptions":
        values = {
            "aicc_convention": AiccConvention(settings.PERMSEL_AICC_CONVENTION),
            "forecast_samples": settings.PERMSEL_FORECAST_SAMPLES,
            "kde_bandwidth": settings.PERMSEL_KDE_BANDWIDTH,
            "seed": settings.PERMSEL_SEED,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(
            aicc_convention=AiccConvention(values["aicc_convention"]),
            forecast_scale=ForecastScale(values.get("forecast_scale", ForecastScale.RELATIVE)),
            forecast_samples=int(values["forecast_samples"]),
            kde_bandwidth=values["kde_bandwidth"],
            seed=int(values["seed"]),
        )


@dataclass(frozen=True)
class SelectionStatistic:
    kind: StatisticKind
    value: float

    def __post_init__(self):
        object.__setattr__(self, "kind", StatisticKind(self.kind))
        if not math.isfinite(self.value):
            raise ValueError(f"{self.kind.title} value must be finite, got {self.value}")


@dataclass(frozen=True)
class ScoreTableRow:
    """One line of a score table; failed models carry `error` and no statistic."""

    model_id: str
    statistic: SelectionStatistic | None
    delta_vs_null: float | None
    p_value: float | None = None
    adjusted_p_value: float | None = None
    exceed_count: int | None = None
    k_params: int | None = None
    loglik: float | None = None
    is_null: bool = False
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.statistic is None

    def with_p_values(self, **values) -> "ScoreTableRow":
        return replace(self, **values)


# ---------- criteria ----------

def aic(loglik, k: int):
    """AIC = -2 ln L + 2K."""
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    return -2.0 * loglik + 2.0 * k


def aicc(loglik, k: int, n: int, convention: AiccConvention = AiccConvention.STANDARD):
    """Small-sample corrected AIC; raises SmallSample when n - k - 1 < 1."""
    if n - k - 1 < 1:
        raise SmallSample(f"AICc needs n - k - 1 >= 1 (n={n}, k={k})")
    correction = 2.0 * k * (k + 1) / (n - k - 1)
    if AiccConvention(convention) is AiccConvention.DISPLAYED:
        return -2.0 * loglik + correction
    return aic(loglik, k) + correction


def ignorance(density_at_outcome):
    """IGN = -log2 p(Y); accepts a scalar or an array of densities."""
    arr = np.asarray(density_at_outcome, dtype=float)
    if np.any(~(arr > 0)):
        raise ZeroDensity("ignorance is undefined for a non-positive density")
    result = -np.log2(arr)
    return float(result) if result.ndim == 0 else result


# ---------- leave-one-out cross-validation ----------

def _fold_perfect_mask(sigma2_fold: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per fold and column: does the fold's training set fit perfectly?

    Measured against the spread of the whole response, since the deletion
    identities leave rounding noise far above a fold's own (zero) variance.
    """
    spread = np.var(y, axis=0)
    floor = (64.0 * _EPS * np.max(np.abs(y), axis=0)) ** 2
    return sigma2_fold <= np.maximum(PERFECT_FIT_TOLERANCE * spread, floor)


def _loo_moments(factor: LeastSquaresFactor, Y: np.ndarray):
    """Held-out predictive means/variances for every fold and response column.

    Uses the deletion identities e_(i) = e_i / (1 - h_i) and
    RSS_(i) = RSS - e_i^2 / (1 - h_i), so no fold is refitted explicitly.
    Returns (mean, sigma2, failed) with one column per response.
    """
    n = factor.n_obs
    if n < factor.n_coef + 2:
        raise TooFewRows(
            f"leave-one-out needs at least {factor.n_coef + 2} rows, got {n}"
        )
    h = factor.leverages
    if np.any(h >= 1.0 - LEVERAGE_TOLERANCE):
        raise FoldRankDeficient("dropping a row leaves a collinear training design")
    E = factor.residuals(Y)
    rss = np.sum(E**2, axis=0)
    one_minus_h = (1.0 - h)[:, None]
    loo_residual = E / one_minus_h
    sigma2 = (rss[None, :] - E**2 / one_minus_h) / (n - 1)
    failed = _fold_perfect_mask(sigma2, Y)
    mean = Y - loo_residual
    return mean, np.where(failed, np.nan, sigma2), failed


def _cv_relative(factor: LeastSquaresFactor, Y: np.ndarray):
    mean, sigma2, failed = _loo_moments(factor, Y)
    with np.errstate(invalid="ignore", divide="ignore"):
        logpdf = sps.norm.logpdf(Y, loc=mean, scale=np.sqrt(sigma2))
    scores = -logpdf / _LN2
    bad = failed.any(axis=0)
    # exact summation: the mean does not depend on fold order
    means = np.array([math.fsum(column) for column in scores.T]) / Y.shape[0]
    return np.where(bad, np.inf, means), bad, FoldPerfectFit


def _cv_count(factor, Y, origins, options: ScoringOptions):
    """Count-scale variant: KDE of Monte-Carlo next-count samples per fold."""
    mean, sigma2, failed = _loo_moments(factor, Y)
    n, J = Y.shape
    values = np.empty(J)
    bad = failed.any(axis=0)
    normals = [
        substream(options.seed, "cv-fold", i).standard_normal(options.forecast_samples)
        for i in range(n)
    ]
    for j in range(J):
        if bad[j]:
            values[j] = np.inf
            continue
        scores = np.empty(n)
        for i in range(n):
            forecast = forecast_from_moments(
                mean[i, j], sigma2[i, j], origins[i], normals[i], bandwidth=options.kde_bandwidth
            )
            density = kde_density(forecast, origins[i] * math.exp(Y[i, j]))
            if not density > 0:
                bad[j] = True
                break
            scores[i] = -math.log2(density)
        values[j] = np.inf if bad[j] else math.fsum(scores) / n
    return values, bad, ZeroDensity


def statistic_values(
    factor: LeastSquaresFactor,
    Y: np.ndarray,
    kind: StatisticKind,
    *,
    k_params: int | None = None,
    options: ScoringOptions | None = None,
    origins: np.ndarray | None = None,
):
    """Statistic for every column of the (n, J) response block.

    Returns (values, failed, error_class): failed columns hold +inf and
    `error_class` names what went wrong with them. Errors that depend on the
    design alone (SmallSample, FoldRankDeficient, TooFewRows) are raised.
    """
    options = options or ScoringOptions()
    kind = StatisticKind(kind)
    n = factor.n_obs
    if kind is StatisticKind.CV_IGN:
        if options.forecast_scale is ForecastScale.COUNT:
            if origins is None:
                raise ValueError("count-scale scoring needs the transition origins")
            return _cv_count(factor, Y, origins, options)
        return _cv_relative(factor, Y)
    k = factor.n_coef + 1 if k_params is None else k_params
    rss = factor.rss(Y)
    bad = perfect_fit_mask(rss, Y)
    with np.errstate(divide="ignore"):
        loglik = gaussian_loglik(np.where(bad, 1.0, rss), n)
    if kind is StatisticKind.AIC:
        values = aic(loglik, k)
    else:
        values = aicc(loglik, k, n, options.aicc_convention)
    return np.where(bad, np.inf, values), bad, PerfectFit


def model_statistic(
    factor: LeastSquaresFactor,
    y: ArrayLike,
    kind: StatisticKind,
    *,
    k_params: int | None = None,
    options: ScoringOptions | None = None,
    origins: np.ndarray | None = None,
) -> SelectionStatistic:
    """Statistic for one response vector; undefined fits raise."""
    y = as_response(y, factor.n_obs)
    values, bad, error = statistic_values(
        factor, y[:, None], kind, k_params=k_params, options=options, origins=origins
    )
    if bad[0]:
        raise error(f"{StatisticKind(kind).title} is undefined for this response")
    return SelectionStatistic(kind, float(values[0]))


def loo_cv_mean_ignorance(
    dataset: TimeSeriesDataset,
    model: ModelSpec,
    *,
    design_builder: Callable = build_design,
    options: ScoringOptions | None = None,
) -> float:
    """Mean ignorance of leave-one-out forecasts of every usable transition."""
    design, y = design_builder(model, dataset)
    try:
        factor = LeastSquaresFactor(design)
    except RankDeficient as exc:
        raise FoldRankDeficient(str(exc)) from exc
    statistic = model_statistic(
        factor,
        y,
        StatisticKind.CV_IGN,
        options=options,
        origins=transition_origins(dataset),
    )
    return statistic.value


# ---------- score tables ----------

def evaluate_model(
    model: ModelSpec,
    dataset: TimeSeriesDataset,
    kind: StatisticKind,
    options: ScoringOptions | None = None,
) -> tuple[SelectionStatistic, int, float]:
    """(statistic, k_params, loglik) of one model on the observed ordering."""
    design, y = build_design(model, dataset)
    factor = LeastSquaresFactor(design)
    fitted = factor.fit(y, k_params=model.k_override)
    statistic = model_statistic(
        factor,
        y,
        kind,
        k_params=model.k_override,
        options=options,
        origins=transition_origins(dataset),
    )
    return statistic, fitted.k_params, fitted.loglik


def with_null_model(models: Sequence[ModelSpec]) -> list[ModelSpec]:
    """The model list with a null model prepended unless one is present."""
    models = list(models)
    if not any(m.is_null for m in models):
        labels = {m.model_id for m in models}
        label = "M0" if "M0" not in labels else "null"
        models.insert(0, ModelSpec.null(label=label))
    return models


def sort_rows(rows: Sequence[ScoreTableRow]) -> list[ScoreTableRow]:
    """Ascending statistic, ties broken by label, failed models last."""
    return sorted(
        rows,
        key=lambda r: (r.failed, r.statistic.value if r.statistic else 0.0, r.model_id),
    )


def build_score_table(
    models: Sequence[ModelSpec],
    dataset: TimeSeriesDataset,
    kind: StatisticKind,
    options: ScoringOptions | None = None,
) -> list[ScoreTableRow]:
    """Score every model, express it relative to the null model and sort.

    A model that cannot be scored gets a row with its error instead of
    aborting the table; the null model itself must succeed.
    """
    kind = StatisticKind(kind)
    models = with_null_model(models)
    null = next(m for m in models if m.is_null)
    null_stat, _, _ = evaluate_model(null, dataset, kind, options)

    rows = []
    for model in models:
        try:
            statistic, k, loglik = evaluate_model(model, dataset, kind, options)
        except SelectionError as exc:
            logger.warning("model %s could not be scored (%s): %s",
                           model.model_id, type(exc).__name__, exc)
            rows.append(ScoreTableRow(
                model_id=model.model_id,
                statistic=None,
                delta_vs_null=None,
                error=f"{type(exc).__name__}: {exc}",
            ))
            continue
        rows.append(ScoreTableRow(
            model_id=model.model_id,
            statistic=statistic,
            delta_vs_null=statistic.value - null_stat.value,
            k_params=k,
            loglik=loglik,
            is_null=model.is_null,
        ))
    return sort_rows(rows)
