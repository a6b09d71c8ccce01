"""
Module: test_scoring.py
Purpose: Pytest test cases for information criteria, the ignorance score,
leave-one-out cross-validation and score tables.
"""

import math

import numpy as np
import pytest
from scipy import stats as sps

from selection.exceptions import FoldPerfectFit, SmallSample, TooFewRows, ZeroDensity
from selection.popmodel import Family, ModelSpec, TimeSeriesDataset
from selection.scoring import (
    AiccConvention,
    ForecastScale,
    ScoringOptions,
    StatisticKind,
    aic,
    aicc,
    build_score_table,
    ignorance,
    loo_cv_mean_ignorance,
    model_statistic,
)
from selection.stats import DesignMatrix, LeastSquaresFactor


# ===== CRITERIA =====

def test_aic_direct_values():
    """
    Verify that AIC = -2 lnL + 2K on the documented examples.
    """
    assert aic(0.0, 2) == 4.0
    assert aic(-10.0, 3) == 26.0


def test_aicc_standard_and_displayed_conventions():
    """
    Verify that AICc adds 2K(K+1)/(n-K-1) to AIC, or to -2 lnL when configured.
    """
    assert aicc(-10.0, 3, 20) == pytest.approx(27.5)
    assert aicc(-10.0, 3, 20, AiccConvention.DISPLAYED) == pytest.approx(21.5)


def test_aicc_small_sample_raises():
    """
    Verify that n - K - 1 < 1 raises SmallSample.
    """
    with pytest.raises(SmallSample):
        aicc(-10.0, 3, 4)


def test_aicc_approaches_aic_and_gap_shrinks_with_n():
    """
    Verify that the AICc correction is positive, decreasing in n and vanishing.
    """
    gaps = [aicc(-10.0, 3, n) - aic(-10.0, 3) for n in (6, 10, 50, 1000)]
    assert all(g > 0 for g in gaps)
    assert gaps == sorted(gaps, reverse=True)
    assert abs(aicc(-10.0, 3, 10**6) - aic(-10.0, 3)) < 1e-4


# ===== IGNORANCE =====

def test_ignorance_known_values():
    """
    Verify that IGN = -log2 p on 0.5, 1 and the standard normal peak.
    """
    assert ignorance(0.5) == pytest.approx(1.0)
    assert ignorance(1.0) == pytest.approx(0.0)
    assert ignorance(1.0 / math.sqrt(2.0 * math.pi)) == pytest.approx(1.32575, abs=1e-5)


def test_ignorance_of_zero_density_raises():
    """
    Verify that a zero density raises ZeroDensity.
    """
    with pytest.raises(ZeroDensity):
        ignorance(0.0)


def test_mean_ignorance_shifts_exactly_with_log_density():
    """
    Verify that scaling every density by 2^-c shifts mean ignorance by +c.
    """
    rng = np.random.default_rng(0)
    densities = rng.uniform(0.05, 2.0, 40)
    shifted = densities * 2.0**-1.5
    assert np.mean(ignorance(shifted)) == pytest.approx(np.mean(ignorance(densities)) + 1.5, abs=1e-12)


def test_ignorance_is_proper_for_gaussian_outcomes():
    """
    Verify that the true N(0,1) forecast beats N(0.5,1) and N(0,4) by over 3 standard errors.
    """
    rng = np.random.default_rng(1)
    y = rng.standard_normal(100_000)
    truth = ignorance(sps.norm.pdf(y))
    for loc, scale in ((0.5, 1.0), (0.0, 2.0)):
        diff = ignorance(sps.norm.pdf(y, loc=loc, scale=scale)) - truth
        assert diff.mean() > 3.0 * diff.std() / math.sqrt(y.size)


# ===== CROSS-VALIDATION =====

def test_loo_mean_ignorance_matches_hand_computation():
    """
    Verify that intercept-only LOO on y = (0,1,3) matches the three-fold closed form.
    """
    y = np.array([0.0, 1.0, 3.0])
    expected = []
    for i in range(3):
        train = np.delete(y, i)
        logpdf = sps.norm.logpdf(y[i], loc=train.mean(), scale=train.std())
        expected.append(-logpdf / math.log(2.0))
    statistic = model_statistic(LeastSquaresFactor(DesignMatrix.intercept(3)), y, StatisticKind.CV_IGN)
    assert statistic.value == pytest.approx(np.mean(expected), abs=1e-10)


def test_loo_fold_with_constant_training_values_fails():
    """
    Verify that a fold whose retained outcomes are equal raises FoldPerfectFit.
    """
    factor = LeastSquaresFactor(DesignMatrix.intercept(3))
    with pytest.raises(FoldPerfectFit):
        model_statistic(factor, [0.0, 0.0, 1.0], StatisticKind.CV_IGN)


def test_loo_on_constant_counts_fails():
    """
    Verify that constant counts (every R = 0) raise FoldPerfectFit.
    """
    dataset = TimeSeriesDataset(years=np.arange(2000, 2006), counts=[100.0] * 6)
    with pytest.raises(FoldPerfectFit):
        loo_cv_mean_ignorance(dataset, ModelSpec.null())


def test_loo_needs_two_more_rows_than_coefficients():
    """
    Verify that fewer than p + 2 rows raise TooFewRows.
    """
    factor = LeastSquaresFactor(DesignMatrix(np.column_stack([np.ones(3), [0.0, 1.0, 3.0]])))
    with pytest.raises(TooFewRows):
        model_statistic(factor, [1.0, 0.0, 2.0], StatisticKind.CV_IGN)


def test_count_scale_cv_is_deterministic(snow_dataset):
    """
    Verify that the Monte-Carlo count-scale CV score is finite and repeatable.
    """
    options = ScoringOptions(forecast_scale=ForecastScale.COUNT, forecast_samples=400, seed=9)
    model = ModelSpec(Family.RICKER, ("snow",), include_density=True, label="snow")
    first = loo_cv_mean_ignorance(snow_dataset, model, options=options)
    second = loo_cv_mean_ignorance(snow_dataset, model, options=options)
    assert math.isfinite(first)
    assert first == second


# ===== SCORE TABLES =====

def test_null_only_table_has_one_row_with_zero_delta(snow_dataset):
    """
    Verify that scoring only the null model gives one row with delta 0.
    """
    rows = build_score_table([ModelSpec.null()], snow_dataset, StatisticKind.CV_IGN)
    assert len(rows) == 1
    assert rows[0].is_null
    assert rows[0].delta_vs_null == 0.0


def test_null_model_is_added_when_missing(snow_dataset):
    """
    Verify that a null row labelled M0 is always part of the table.
    """
    rows = build_score_table(
        [ModelSpec(Family.RICKER, include_density=True, label="M1")], snow_dataset, StatisticKind.AIC
    )
    assert sorted(r.model_id for r in rows) == ["M0", "M1"]


def test_nested_model_never_has_lower_loglik(noise_dataset):
    """
    Verify that adding a covariate to a model never lowers its log-likelihood.
    """
    small = ModelSpec(Family.RICKER, include_density=True, label="small")
    big = ModelSpec(Family.RICKER, ("temp",), include_density=True, label="big")
    rows = {r.model_id: r for r in build_score_table([small, big], noise_dataset, StatisticKind.AIC)}
    assert rows["big"].loglik >= rows["small"].loglik


def test_aic_ranking_equals_loglik_ranking_for_equal_k(noise_dataset):
    """
    Verify that with equal K the AIC order is the log-likelihood order.
    """
    models = [
        ModelSpec(Family.GOMPERTZ, (name,), label=name)
        for name in ("temp", "rain", "wind", "frost", "grass")
    ]
    rows = [r for r in build_score_table(models, noise_dataset, StatisticKind.AIC) if not r.is_null]
    by_aic = [r.model_id for r in rows]
    by_loglik = [r.model_id for r in sorted(rows, key=lambda r: -r.loglik)]
    assert by_aic == by_loglik


def test_snow_model_ranks_first_on_snow_driven_data(snow_dataset):
    """
    Verify that the informative covariate wins by AIC and has a negative delta.
    """
    models = [
        ModelSpec(Family.RICKER, include_density=True, label="density"),
        ModelSpec(Family.RICKER, ("snow",), include_density=True, label="snow"),
        ModelSpec(Family.RICKER, ("temp",), include_density=True, label="temp"),
    ]
    rows = build_score_table(models, snow_dataset, StatisticKind.AIC)
    assert rows[0].model_id == "snow"
    assert rows[0].delta_vs_null < 0


def test_unscorable_model_is_annotated_and_listed_last(snow_dataset):
    """
    Verify that a collinear model gets an error row instead of aborting the table.
    """
    dataset = TimeSeriesDataset(
        years=snow_dataset.years,
        counts=snow_dataset.counts,
        covariates={"snow": snow_dataset.covariates["snow"],
                    "snow2": 2.0 * snow_dataset.covariates["snow"]},
    )
    models = [
        ModelSpec(Family.RICKER, ("snow",), label="good"),
        ModelSpec(Family.RICKER, ("snow", "snow2"), label="bad"),
    ]
    rows = build_score_table(models, dataset, StatisticKind.AICC)
    assert rows[-1].model_id == "bad"
    assert rows[-1].failed
    assert rows[-1].error.startswith("RankDeficient")


def test_tied_statistics_are_ordered_by_label(snow_dataset):
    """
    Verify that two models with identical designs and statistics are listed by label.
    """
    models = [
        ModelSpec(Family.RICKER, ("snow",), include_density=True, label="snow_b"),
        ModelSpec(Family.RICKER, ("snow",), include_density=True, label="snow_a"),
        ModelSpec(Family.RICKER, ("temp",), include_density=True, label="temp"),
    ]
    rows = build_score_table(models, snow_dataset, StatisticKind.AIC)
    assert [r.model_id for r in rows[:2]] == ["snow_a", "snow_b"]
    assert rows[0].statistic.value == rows[1].statistic.value
