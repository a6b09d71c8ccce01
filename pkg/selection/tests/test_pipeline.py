"""
Module: test_pipeline.py
Purpose: Pytest test cases for run configuration parsing and the fit,
permtest and select pipelines, including provenance-based reruns.
"""

import json

import pytest

from selection.exceptions import ConfigError
from selection.pipeline import (
    load_run_config,
    parse_run_config,
    run_fit,
    run_permtests,
    run_selection,
)
from selection.scoring import StatisticKind


@pytest.fixture
def snow_config(snow_dataset, write_csv, write_config, base_document):
    """
    Return the path of a valid configuration over the snow-driven series.
    """
    write_csv(snow_dataset)
    return write_config(base_document)


# ===== CONFIGURATION =====

def test_config_resolves_defaults(snow_config):
    """
    Verify that a minimal document gets defaults for every optional key.
    """
    config = load_run_config(snow_config)
    assert [m.model_id for m in config.models] == ["M1", "M2", "M3"]
    assert config.statistics == (StatisticKind.AIC,)
    assert (config.permutations, config.seed, config.drop_best) == (64, 3, 0)
    assert config.output_dir == snow_config.parent / "results"
    assert config.canonical()["forecast_scale"] == "relative"


def test_overrides_replace_document_values(snow_config):
    """
    Verify that non-None keyword overrides win over the file.
    """
    config = load_run_config(snow_config, seed=11, permutations=None, statistics=["aicc", "cv-ign"])
    assert config.seed == 11
    assert config.permutations == 64
    assert config.statistics == (StatisticKind.AICC, StatisticKind.CV_IGN)


def test_unknown_key_is_rejected(snow_dataset, write_csv, tmp_path, base_document):
    """
    Verify that an undeclared top-level key is a configuration error naming it.
    """
    write_csv(snow_dataset)
    with pytest.raises(ConfigError) as excinfo:
        parse_run_config({**base_document, "permutation": 10}, tmp_path)
    assert "permutation" in str(excinfo.value)


def test_unsupported_schema_version_is_rejected(snow_dataset, write_csv, tmp_path, base_document):
    """
    Verify that schema_version 2 is refused.
    """
    write_csv(snow_dataset)
    with pytest.raises(ConfigError):
        parse_run_config({**base_document, "schema_version": 2}, tmp_path)


def test_unknown_covariate_is_a_config_error(snow_dataset, write_csv, tmp_path, base_document):
    """
    Verify that a model naming a column absent from the CSV is a configuration error.
    """
    write_csv(snow_dataset)
    document = {**base_document, "models": [{"label": "D", "family": "ricker", "covariates": ["depth"]}]}
    with pytest.raises(ConfigError) as excinfo:
        parse_run_config(document, tmp_path)
    assert "depth" in str(excinfo.value)


def test_duplicate_labels_are_rejected(snow_dataset, write_csv, tmp_path, base_document):
    """
    Verify that two models with one label are a configuration error.
    """
    write_csv(snow_dataset)
    models = [{"label": "A", "family": "ricker"}, {"label": "A", "family": "gompertz"}]
    with pytest.raises(ConfigError):
        parse_run_config({**base_document, "models": models}, tmp_path)


def test_malformed_json_reports_line(tmp_path):
    """
    Verify that invalid JSON is a configuration error with the file line.
    """
    path = tmp_path / "broken.json"
    path.write_text('{\n  "schema_version": 1,\n  "dataset": \n}\n', encoding="utf-8")
    with pytest.raises(ConfigError) as excinfo:
        load_run_config(path)
    assert str(excinfo.value).startswith("broken.json: line ")


def test_config_hash_ignores_output_dir(snow_config, base_document, tmp_path):
    """
    Verify that the configuration hash depends on the run, not on where results go.
    """
    first = parse_run_config({**base_document, "output_dir": "a"}, tmp_path)
    second = parse_run_config({**base_document, "output_dir": "b"}, tmp_path)
    third = parse_run_config({**base_document, "seed": 4}, tmp_path)
    assert first.config_sha256() == second.config_sha256()
    assert first.config_sha256() != third.config_sha256()


def test_excluded_years_drop_transitions(snow_config, base_document, tmp_path):
    """
    Verify that excluding one inner year removes two transitions.
    """
    config = parse_run_config({**base_document, "exclude_years": [1990]}, tmp_path)
    assert config.exclude_years == (1990,)
    assert config.dataset.transition_years().size == config.dataset.n_years - 3


# ===== FIT =====

def test_fit_reports_every_model_and_null(snow_config):
    """
    Verify that run_fit returns the null model plus each configured model with criteria.
    """
    fits = {f.model_id: f for f in run_fit(load_run_config(snow_config))}
    assert set(fits) == {"M0", "M1", "M2", "M3"}
    m2 = fits["M2"]
    assert m2.error is None
    assert list(m2.coefficients) == ["intercept", "density", "snow"]
    assert m2.aic == pytest.approx(-2.0 * m2.loglik + 2.0 * m2.k_params)
    assert m2.aicc > m2.aic
    assert len(m2.cooks) == len(m2.years) == 30


def test_fit_forecast_summarises_next_year(snow_config, base_document, tmp_path):
    """
    Verify that the forecast targets the year after the series with ordered quantiles.
    """
    config = parse_run_config({**base_document, "forecast_samples": 500}, tmp_path)
    fits = run_fit(config, forecast=True)
    for fit in fits:
        forecast = fit.forecast
        assert forecast.year == 2011
        assert 0 < forecast.q05 <= forecast.median <= forecast.q95
        assert forecast.bandwidth > 0


# ===== PERMUTATION TESTS =====

def test_permtests_cover_non_null_models(snow_config):
    """
    Verify that every non-null model gets raw and adjusted p-values.
    """
    results = run_permtests(load_run_config(snow_config, statistics=["aic", "aicc"]))
    assert set(results) == {StatisticKind.AIC, StatisticKind.AICC}
    for rows in results.values():
        assert [r.model_id for r in rows] == ["M1", "M2", "M3"]
        for row in rows:
            assert row.permutations == 64
            assert row.p_value == row.exceed_count / 64
            assert row.adjusted_p_value >= row.p_value


# ===== SELECTION =====

def test_selection_bundle_has_table_selection_and_ecdf(snow_config):
    """
    Verify that each kind yields a sorted table, a selection test and an ECDF.
    """
    bundle = run_selection(load_run_config(snow_config))
    result = bundle.result("aic")
    assert result.table[0].model_id == "M2"
    null_row = next(r for r in result.table if r.is_null)
    assert null_row.delta_vs_null == 0.0
    assert null_row.p_value is None
    assert result.selection.best_model == "M2"
    assert result.selection.p_value < 0.05
    fractions = [row[2] for row in result.ecdf]
    assert fractions == sorted(fractions)
    assert bundle.provenance.config_sha256 == load_run_config(snow_config).config_sha256()


def test_null_only_configuration_is_degenerate(snow_dataset, write_csv, tmp_path, base_document):
    """
    Verify that a null-only model set gives one row, no p-values and a degenerate p = 0.
    """
    write_csv(snow_dataset)
    config = parse_run_config(
        {**base_document, "models": [{"label": "M0", "family": "null"}]}, tmp_path
    )
    result = run_selection(config).result("aic")
    assert len(result.table) == 1
    assert result.table[0].p_value is None
    assert result.selection.p_value == 0.0
    assert result.selection.degenerate


def test_dropping_the_best_model_raises_selection_p(informative_dataset, write_csv, tmp_path):
    """
    Verify that removing the informative model leaves a clearly weaker selection.
    """
    write_csv(informative_dataset)
    document = {
        "schema_version": 1,
        "dataset": "counts.csv",
        "models": [
            {"label": "snow", "family": "ricker", "covariates": ["snow"]},
            {"label": "temp", "family": "ricker", "covariates": ["temp"]},
            {"label": "rain", "family": "ricker", "covariates": ["rain"]},
        ],
        "permutations": 128,
        "seed": 2,
    }
    full = run_selection(parse_run_config(document, tmp_path))
    dropped = run_selection(parse_run_config({**document, "drop_best": 1}, tmp_path))
    assert full.dropped_models == []
    assert dropped.dropped_models == ["snow"]
    assert full.result("aic").selection.best_model == "snow"
    assert dropped.result("aic").selection.p_value > full.result("aic").selection.p_value


def test_drop_best_must_leave_a_model(informative_dataset, write_csv, tmp_path, base_document):
    """
    Verify that dropping all non-null models is a configuration error.
    """
    write_csv(informative_dataset)
    with pytest.raises(ConfigError):
        parse_run_config({**base_document, "drop_best": 3}, tmp_path)


def test_provenance_config_reproduces_the_run(snow_config, tmp_path):
    """
    Verify that feeding provenance.config back in gives the same results.
    """
    config = load_run_config(snow_config, statistics=["aic", "cv-ign"])
    bundle = run_selection(config)
    document = json.loads(json.dumps(bundle.provenance.config))
    again = run_selection(parse_run_config(document, tmp_path))
    assert again.provenance.config_sha256 == bundle.provenance.config_sha256
    for kind in ("aic", "cv-ign"):
        first, second = bundle.result(kind), again.result(kind)
        assert second.selection.exceed_count == first.selection.exceed_count
        assert [r.p_value for r in second.table] == [r.p_value for r in first.table]
