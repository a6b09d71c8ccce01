"""Result files: a CSV and an aligned text table per result, plus bundle.json.

CSV files go through pandas, text tables through the `selection/table.txt`
template, and the bundle through the DRF serializers and JSON renderer.
"""

import logging
from pathlib import Path
from typing import Sequence

import pandas as pd
from django.template.loader import render_to_string
from rest_framework.renderers import JSONRenderer

from .experiments import Experiment1Result
from .pipeline import ModelFit, PermtestRow, ResultsBundle
from .scoring import ScoreTableRow, StatisticKind
from .serializers import ResultsBundleSerializer
from .templatetags.selection_extras import fmt_p, fmt_stat

logger = logging.getLogger(__name__)

_FLOAT_FORMAT = "%.10g"


def _write_csv(frame: pd.DataFrame, path: Path, integer_columns: Sequence[str] = ()) -> Path:
    for column in integer_columns:
        frame[column] = frame[column].astype("Int64")
    frame.to_csv(path, index=False, lineterminator="\n", float_format=_FLOAT_FORMAT)
    return path


def render_table(heading: str, header: Sequence[str], rows: Sequence[Sequence], notes=()) -> str:
    """Aligned plain-text table; every cell is already a string."""
    rows = [[str(c) for c in row] for row in rows]
    widths = [max([len(h)] + [len(r[i]) for r in rows]) for i, h in enumerate(header)]
    rule = "-" * (sum(widths) + 2 * (len(widths) - 1))
    return render_to_string(
        "selection/table.txt",
        {"heading": heading, "header": header, "widths": widths, "rule": rule,
         "rows": rows, "notes": list(notes)},
    )


def _write_text(text: str, path: Path) -> Path:
    path.write_text(text, encoding="utf-8", newline="\n")
    return path


# ---------- score tables ----------

def score_table_frame(rows: Sequence[ScoreTableRow]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "model": r.model_id,
                "k": r.k_params,
                "loglik": r.loglik,
                "statistic": None if r.failed else r.statistic.value,
                "delta_vs_null": r.delta_vs_null,
                "exceed_count": r.exceed_count,
                "p_value": r.p_value,
                "adjusted_p_value": r.adjusted_p_value,
                "error": r.error or "",
            }
            for r in rows
        ],
        columns=["model", "k", "loglik", "statistic", "delta_vs_null",
                 "exceed_count", "p_value", "adjusted_p_value", "error"],
    )


def score_table_text(kind: StatisticKind, rows: Sequence[ScoreTableRow], J: int | None) -> str:
    header = ["Model", "K", kind.title, f"d{kind.title}", "p", "p (WY)"]
    cells = [
        [
            r.model_id + (" (null)" if r.is_null else ""),
            "-" if r.k_params is None else r.k_params,
            fmt_stat(None if r.failed else r.statistic.value),
            fmt_stat(r.delta_vs_null),
            fmt_p(r.p_value),
            fmt_p(r.adjusted_p_value),
        ]
        for r in rows
    ]
    notes = [f"{r.model_id}: {r.error}" for r in rows if r.failed]
    heading = f"{kind.title} score table" + (f" (J = {J})" if J else "")
    return render_table(heading, header, cells, notes)


def write_bundle(bundle: ResultsBundle, out_dir: Path | str) -> list[Path]:
    """Every `select` output file; returns the paths written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for result in bundle.results:
        kind = result.kind
        J = result.selection.permutation_count if result.selection else None
        written.append(_write_csv(
            score_table_frame(result.table), out_dir / f"score_table_{kind.value}.csv",
            integer_columns=["k", "exceed_count"],
        ))
        written.append(_write_text(
            score_table_text(kind, result.table, J), out_dir / f"score_table_{kind.value}.txt"
        ))
        if result.ecdf is not None:
            ecdf = pd.DataFrame(result.ecdf, columns=["statistic", "delta_vs_null", "cumulative_fraction"])
            written.append(_write_csv(ecdf, out_dir / f"ecdf_{kind.value}.csv"))

    selection = pd.DataFrame(
        [
            {
                "statistic": r.kind.value,
                "observed_min": r.selection.observed_stat,
                "best_model": r.selection.best_model,
                "exceed_count": r.selection.exceed_count,
                "permutations": r.selection.permutation_count,
                "p_value": r.selection.p_value,
                "failed_refits": r.selection.failed_refits,
                "degenerate": r.selection.degenerate,
            }
            for r in bundle.results
            if r.selection is not None
        ]
    )
    written.append(_write_csv(selection, out_dir / "selection.csv"))

    config = bundle.provenance.config
    summary = render_to_string(
        "selection/summary.txt",
        {
            "config": config,
            "provenance": bundle.provenance,
            "results": [r for r in bundle.results if r.selection is not None],
            "dropped": bundle.dropped_models,
            "excluded": config["exclude_years"],
            "first_year": bundle.first_year,
            "last_year": bundle.last_year,
        },
    )
    written.append(_write_text(summary, out_dir / "summary.txt"))

    payload = JSONRenderer().render(
        ResultsBundleSerializer(bundle).data, renderer_context={"indent": 2}
    )
    bundle_path = out_dir / "bundle.json"
    bundle_path.write_bytes(payload + b"\n")
    written.append(bundle_path)
    logger.info("wrote %d files to %s", len(written), out_dir)
    return written


# ---------- permtest ----------

def write_permtests(results: dict[StatisticKind, list[PermtestRow]], out_dir: Path | str) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for kind, rows in results.items():
        frame = pd.DataFrame(
            [vars(r) for r in rows],
            columns=["model_id", "observed", "exceed_count", "permutations",
                     "p_value", "adjusted_p_value", "failed_refits"],
        ).rename(columns={"model_id": "model"})
        written.append(_write_csv(frame, out_dir / f"permtest_{kind.value}.csv"))
        text = render_table(
            f"{kind.title} single-model permutation tests",
            ["Model", kind.title, "Exceed", "J", "p", "p (WY)", "Failed"],
            [
                [r.model_id, fmt_stat(r.observed), r.exceed_count, r.permutations,
                 fmt_p(r.p_value), fmt_p(r.adjusted_p_value), r.failed_refits]
                for r in rows
            ],
        )
        written.append(_write_text(text, out_dir / f"permtest_{kind.value}.txt"))
    return written


# ---------- fit ----------

def write_fit(fits: Sequence[ModelFit], out_dir: Path | str) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    summary = pd.DataFrame(
        [
            {
                "model": f.model_id,
                "family": f.family,
                "k": f.k_params,
                "loglik": f.loglik,
                "sigma2": f.sigma2,
                "coefficients": ";".join(f"{name}={value:.10g}" for name, value in f.coefficients.items()),
                "aic": f.aic,
                "aicc": f.aicc,
                "max_cooks_distance": max(f.cooks) if f.cooks else None,
                "influential_years": ";".join(map(str, f.influential_years)),
                "error": f.error or f.note or "",
            }
            for f in fits
        ]
    )
    written.append(_write_csv(summary, out_dir / "fit_summary.csv", integer_columns=["k"]))
    written.append(_write_text(
        render_table(
            "Model fits",
            ["Model", "Family", "K", "logL", "AIC", "AICc", "max D", "Influential"],
            [
                [f.model_id, f.family, "-" if f.k_params is None else f.k_params,
                 fmt_stat(f.loglik), fmt_stat(f.aic), fmt_stat(f.aicc),
                 fmt_stat(max(f.cooks) if f.cooks else None),
                 ",".join(map(str, f.influential_years)) or "-"]
                for f in fits
            ],
            notes=[f"{f.model_id}: {f.error or f.note}" for f in fits if f.error or f.note],
        ),
        out_dir / "fit_summary.txt",
    ))

    cooks = pd.DataFrame(
        [
            {"model": f.model_id, "year": year, "cooks_distance": d}
            for f in fits if f.cooks
            for year, d in zip(f.years, f.cooks)
        ],
        columns=["model", "year", "cooks_distance"],
    )
    written.append(_write_csv(cooks, out_dir / "cooks_distance.csv"))

    forecasts = [f for f in fits if f.forecast is not None]
    if forecasts:
        frame = pd.DataFrame(
            [{"model": f.model_id, **vars(f.forecast)} for f in forecasts]
        )
        written.append(_write_csv(frame, out_dir / "forecast.csv"))
    return written


# ---------- experiment 1 ----------

def write_experiment1(results: Sequence[Experiment1Result], out_dir: Path | str) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(
        [
            {
                "case": r.case,
                "n_models": r.n_models,
                "repeats": r.repeats,
                "naive_reject_rate": r.naive_reject_rate,
                "selection_test_reject_rate": r.selection_test_reject_rate,
                "band_low": r.binomial_band[0],
                "band_high": r.binomial_band[1],
            }
            for r in results
        ]
    )
    text = render_table(
        "Experiment 1: type-I error of naive best-model testing",
        ["Case", "Models", "Naive", "Selection", "Band"],
        [
            [r.case, r.n_models, fmt_stat(r.naive_reject_rate, 4),
             fmt_stat(r.selection_test_reject_rate, 4),
             f"[{r.binomial_band[0]:.4f}, {r.binomial_band[1]:.4f}]"]
            for r in results
        ],
    )
    return [
        _write_csv(frame, out_dir / "experiment1.csv"),
        _write_text(text, out_dir / "experiment1.txt"),
    ]
