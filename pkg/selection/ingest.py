"""CSV input and normalized CSV output of population time series."""

import logging
import re
from pathlib import Path

import numpy as np
import pandas as pd

from .exceptions import DataError, ParseError
from .popmodel import TimeSeriesDataset

logger = logging.getLogger(__name__)

REQUIRED_COLUMNS = ("year", "count")
_LINE_IN_MESSAGE = re.compile(r"line (\d+)")


def _read_frame(path: Path) -> pd.DataFrame:
    try:
        return pd.read_csv(
            path,
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=False,
            skipinitialspace=True,
            encoding="utf-8",
        )
    except FileNotFoundError:
        raise DataError(f"dataset file not found: {path}") from None
    except pd.errors.EmptyDataError:
        raise ParseError("file is empty, expected a header row", line=1) from None
    except pd.errors.ParserError as exc:
        match = _LINE_IN_MESSAGE.search(str(exc))
        line = int(match.group(1)) if match else None
        raise ParseError(f"malformed row ({exc})", line=line) from None
    except UnicodeDecodeError:
        raise ParseError("file is not valid UTF-8") from None


def _numeric_column(frame: pd.DataFrame, column: str, required: bool) -> np.ndarray:
    raw = frame[column].str.strip()
    values = pd.to_numeric(raw.mask(raw == ""), errors="coerce")
    bad = values.isna() & (raw != "")
    if required:
        bad |= raw == ""
    if bad.any():
        row = int(bad.idxmax())
        # header is line 1 and blank lines are kept, so index i is line i + 2
        raise ParseError(
            f"column '{column}' has non-numeric value '{raw[row]}'", line=row + 2
        )
    return values.to_numpy(dtype=float)


def ingest_csv(path: str | Path) -> TimeSeriesDataset:
    """Read a `year,count[,covariate...]` CSV into a validated dataset.

    Parse errors name the file and, when known, the offending line.
    """
    path = Path(path)
    try:
        return _ingest(path)
    except ParseError as exc:
        raise ParseError(exc.detail, line=exc.line, source=path.name) from None


def _ingest(path: Path) -> TimeSeriesDataset:
    frame = _read_frame(path).fillna("")
    frame.columns = [str(c).strip() for c in frame.columns]
    if len(set(frame.columns)) != len(frame.columns):
        raise ParseError("duplicate column names in header", line=1)
    for column in REQUIRED_COLUMNS:
        if column not in frame.columns:
            raise ParseError(f"missing required column '{column}'", line=1)

    blank = (frame.apply(lambda c: c.str.strip()) == "").all(axis=1)
    frame = frame[~blank]
    if frame.empty:
        raise ParseError("no data rows after the header", line=2)

    years = _numeric_column(frame, "year", required=True)
    non_integer = years != np.round(years)
    if non_integer.any():
        row = int(frame.index[np.argmax(non_integer)])
        raise ParseError(f"year '{frame['year'][row]}' is not an integer", line=row + 2)
    counts = _numeric_column(frame, "count", required=True)
    covariates = {
        name: _numeric_column(frame, name, required=False)
        for name in frame.columns
        if name not in REQUIRED_COLUMNS
    }
    dataset = TimeSeriesDataset(years=years.astype(int), counts=counts, covariates=covariates)
    logger.info(
        "loaded %s: %d years (%d-%d), covariates %s",
        path.name, dataset.n_years, dataset.years[0], dataset.years[-1], dataset.covariate_names or "none",
    )
    return dataset


def emit_csv(dataset: TimeSeriesDataset, path: str | Path) -> Path:
    """Write the dataset as normalized CSV; `ingest_csv` reads it back unchanged."""
    path = Path(path)
    frame = pd.DataFrame({"year": dataset.years, "count": dataset.counts})
    for name, series in dataset.covariates.items():
        frame[name] = series
    frame.to_csv(path, index=False, lineterminator="\n", na_rep="")
    return path
