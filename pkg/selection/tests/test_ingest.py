"""
Module: test_ingest.py
Purpose: Pytest test cases for reading population CSV files and writing them
back in normalized form, including line numbers in parse errors.
"""

import math

import numpy as np
import pytest

from selection.exceptions import DataError, GapError, NonPositiveCount, ParseError
from selection.ingest import emit_csv, ingest_csv
from selection.popmodel import relative_change


@pytest.fixture
def csv_file(tmp_path):
    """
    Return a helper that writes raw CSV text to tmp_path/data.csv.
    """
    def _write(text):
        path = tmp_path / "data.csv"
        path.write_text(text, encoding="utf-8")
        return path
    return _write


# ===== READING =====

def test_two_year_file_gives_one_transition(csv_file):
    """
    Verify that a two-row file yields one relative change ln(150/100).
    """
    dataset = ingest_csv(csv_file("year,count\n2000,100\n2001,150\n"))
    np.testing.assert_array_equal(dataset.years, [2000, 2001])
    assert relative_change(dataset) == pytest.approx([math.log(1.5)])
    assert dataset.covariate_names == []


def test_extra_columns_become_covariates(csv_file):
    """
    Verify that every non-required column is read as a numeric covariate.
    """
    dataset = ingest_csv(csv_file("year, count, snow\n2000,100,0.5\n2001,120,-1.25\n2002,90,2\n"))
    assert dataset.covariate_names == ["snow"]
    np.testing.assert_allclose(dataset.covariates["snow"], [0.5, -1.25, 2.0])


def test_missing_count_column_is_named(csv_file):
    """
    Verify that a header without 'count' raises ParseError on line 1 naming the column.
    """
    with pytest.raises(ParseError) as excinfo:
        ingest_csv(csv_file("year,total\n2000,100\n2001,150\n"))
    assert excinfo.value.line == 1
    assert "count" in str(excinfo.value)
    assert str(excinfo.value).startswith("data.csv: line 1:")


def test_row_with_extra_field_reports_its_line(csv_file):
    """
    Verify that a row with too many fields is reported with its file line.
    """
    with pytest.raises(ParseError) as excinfo:
        ingest_csv(csv_file("year,count\n2000,100\n2001,120,7\n2002,90\n"))
    assert excinfo.value.line == 3


def test_non_numeric_count_reports_its_line(csv_file):
    """
    Verify that a non-numeric count is reported on its own line.
    """
    with pytest.raises(ParseError) as excinfo:
        ingest_csv(csv_file("year,count\n2000,100\n2001,many\n"))
    assert excinfo.value.line == 3
    assert "many" in str(excinfo.value)


def test_blank_lines_are_skipped_but_counted(csv_file):
    """
    Verify that blank lines are ignored while later line numbers stay exact.
    """
    dataset = ingest_csv(csv_file("year,count\n2000,100\n\n2001,110\n"))
    assert dataset.n_years == 2
    with pytest.raises(ParseError) as excinfo:
        ingest_csv(csv_file("year,count\n2000,100\n\n2001,x\n"))
    assert excinfo.value.line == 4


def test_missing_file_is_a_data_error(tmp_path):
    """
    Verify that a missing file raises DataError.
    """
    with pytest.raises(DataError):
        ingest_csv(tmp_path / "absent.csv")


def test_year_gap_is_rejected(csv_file):
    """
    Verify that skipped years raise GapError.
    """
    with pytest.raises(GapError):
        ingest_csv(csv_file("year,count\n2000,100\n2002,120\n"))


def test_zero_count_is_rejected(csv_file):
    """
    Verify that a zero count raises NonPositiveCount.
    """
    with pytest.raises(NonPositiveCount):
        ingest_csv(csv_file("year,count\n2000,100\n2001,0\n"))


# ===== WRITING =====

def test_emitted_csv_reads_back(snow_dataset, tmp_path):
    """
    Verify that emit_csv writes a file ingest_csv reads back to the same series.
    """
    path = emit_csv(snow_dataset, tmp_path / "out.csv")
    again = ingest_csv(path)
    np.testing.assert_array_equal(again.years, snow_dataset.years)
    np.testing.assert_allclose(again.counts, snow_dataset.counts, rtol=1e-12)
    assert again.covariate_names == snow_dataset.covariate_names
    for name in snow_dataset.covariate_names:
        np.testing.assert_allclose(again.covariates[name], snow_dataset.covariates[name], rtol=1e-12)
    assert path.read_text(encoding="utf-8").splitlines()[0] == "year,count," + ",".join(
        snow_dataset.covariate_names
    )
