"""
Module: conftest.py
Purpose: Shared pytest fixtures for the selection app.
Provides synthetic population series (one with a real covariate effect, one
pure noise) and helpers that write them, plus run configurations, to tmp_path.
"""

import json

import numpy as np
import pytest

from selection.ingest import emit_csv
from selection.popmodel import TimeSeriesDataset


def _simulate(seed, n_years, effect, density, noise=0.1, start=300.0):
    """Ricker-shaped series: R_i = 0.6 - density*n_i + effect*snow_i + eps."""
    rng = np.random.default_rng(seed)
    snow = rng.normal(0.0, 1.0, n_years)
    covariates = {
        "snow": snow,
        "temp": rng.normal(0.0, 1.0, n_years),
        "rain": rng.normal(0.0, 1.0, n_years),
        "wind": rng.normal(0.0, 1.0, n_years),
        "frost": rng.normal(0.0, 1.0, n_years),
        "grass": rng.normal(0.0, 1.0, n_years),
    }
    counts = np.empty(n_years)
    counts[0] = start
    for i in range(n_years - 1):
        growth = (0.6 - density * counts[i] if density else 0.0) + effect * snow[i]
        counts[i + 1] = counts[i] * np.exp(growth + rng.normal(0.0, noise))
    return TimeSeriesDataset(
        years=np.arange(1980, 1980 + n_years),
        counts=np.round(counts, 1),
        covariates=covariates,
    )


@pytest.fixture
def snow_dataset():
    """
    Ibex-shaped series (31 years): density dependence plus a strong snow effect.
    """
    return _simulate(seed=7, n_years=31, effect=-0.3, density=0.002)


@pytest.fixture
def noise_dataset():
    """
    Series whose covariates carry no information about population change.
    """
    return _simulate(seed=11, n_years=25, effect=0.0, density=0.0, noise=0.2)


@pytest.fixture
def informative_dataset():
    """
    Series driven by snow only; every other covariate is noise.
    """
    return _simulate(seed=5, n_years=30, effect=0.3, density=0.0)


@pytest.fixture
def write_csv(tmp_path):
    """
    Return a helper that writes a dataset as CSV under tmp_path.
    """
    def _write(dataset, name="counts.csv"):
        return emit_csv(dataset, tmp_path / name)
    return _write


@pytest.fixture
def write_config(tmp_path):
    """
    Return a helper that writes a run configuration document under tmp_path.
    """
    def _write(document, name="run.json"):
        path = tmp_path / name
        path.write_text(json.dumps(document, indent=2), encoding="utf-8")
        return path
    return _write


@pytest.fixture
def base_document():
    """
    Return a minimal valid configuration referring to counts.csv.
    """
    return {
        "schema_version": 1,
        "dataset": "counts.csv",
        "models": [
            {"label": "M1", "family": "ricker", "density": True},
            {"label": "M2", "family": "ricker", "density": True, "covariates": ["snow"]},
            {"label": "M3", "family": "gompertz", "density": True, "covariates": ["temp"]},
        ],
        "statistics": ["aic"],
        "permutations": 64,
        "seed": 3,
    }
