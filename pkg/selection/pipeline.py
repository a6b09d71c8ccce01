"""Run configuration loading and the fit / permtest / select pipelines.

A run is fully described by its canonical configuration (every default
resolved) plus the dataset file; both are hashed into the provenance block, and
feeding `provenance.config` back to `parse_run_config` reproduces the run.
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from django.conf import settings

from .exceptions import ConfigError, LeverageOne, SelectionError, SmallSample
from .ingest import ingest_csv
from .permute import PermTestResult, PermutationRun, prepare_candidates, run_permutations
from .popmodel import (
    ModelSpec,
    TimeSeriesDataset,
    build_design,
    monte_carlo_forecast,
    predictor_row,
)
from .scoring import (
    ScoreTableRow,
    ScoringOptions,
    StatisticKind,
    aic,
    aicc,
    build_score_table,
    with_null_model,
)
from .serializers import RunConfigSerializer
from .stats import cooks_distance, fit_linear_gaussian, influential_observations

logger = logging.getLogger(__name__)


# ---------- configuration ----------

@dataclass(frozen=True, eq=False)
class RunConfig:
    dataset_name: str
    dataset: TimeSeriesDataset
    dataset_sha256: str
    models: tuple[ModelSpec, ...]
    statistics: tuple[StatisticKind, ...]
    permutations: int
    seed: int
    output_dir: Path
    add_one: bool
    options: ScoringOptions
    drop_best: int = 0
    exclude_years: tuple[int, ...] = ()
    influence_threshold: float | None = None

    def canonical(self) -> dict:
        """The configuration as a schema-1 document with every default resolved."""
        return {
            "schema_version": 1,
            "dataset": self.dataset_name,
            "models": [_model_document(m) for m in self.models],
            "statistics": [k.value for k in self.statistics],
            "permutations": self.permutations,
            "seed": self.seed,
            "add_one": self.add_one,
            "aicc_convention": self.options.aicc_convention.value,
            "forecast_scale": self.options.forecast_scale.value,
            "forecast_samples": self.options.forecast_samples,
            "kde_bandwidth": self.options.kde_bandwidth,
            "drop_best": self.drop_best,
            "exclude_years": list(self.exclude_years),
            "influence_threshold": self.influence_threshold,
        }

    def config_sha256(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _model_document(model: ModelSpec) -> dict:
    return {
        "label": model.model_id,
        "family": model.family.value,
        "density": model.include_density,
        "covariates": list(model.covariate_names),
        "interactions": [list(pair) for pair in model.interactions],
        "k_override": model.k_override,
    }


def _flatten_errors(errors, prefix: str = "") -> list[str]:
    if isinstance(errors, dict):
        out = []
        for key, value in errors.items():
            name = key if key != "non_field_errors" else ""
            out.extend(_flatten_errors(value, f"{prefix}.{name}".strip(".") if name else prefix))
        return out
    if isinstance(errors, list):
        out = []
        for index, value in enumerate(errors):
            if isinstance(value, (dict, list)):
                out.extend(_flatten_errors(value, f"{prefix}[{index}]"))
            else:
                out.append(f"{prefix}: {value}" if prefix else str(value))
        return out
    return [f"{prefix}: {errors}" if prefix else str(errors)]


def parse_run_config(document: dict, base_dir: Path | str = ".", **overrides) -> RunConfig:
    """Validate a configuration document; non-None overrides replace its keys."""
    if not isinstance(document, dict):
        raise ConfigError("the configuration must be a JSON object")
    document = {**document, **{k: v for k, v in overrides.items() if v is not None}}
    serializer = RunConfigSerializer(data=document)
    if not serializer.is_valid():
        raise ConfigError("invalid configuration: " + "; ".join(_flatten_errors(serializer.errors)))
    data = serializer.validated_data

    dataset_path = Path(base_dir) / data["dataset"]
    dataset = ingest_csv(dataset_path)
    models = tuple(serializer.fields["models"].child.create(m) for m in data["models"])
    available = set(dataset.covariate_names)
    for model in models:
        missing = [name for name in model.required_covariates() if name not in available]
        if missing:
            raise ConfigError(
                f"model '{model.model_id}' uses covariates {missing} missing from {dataset_path.name}"
            )
    if data["exclude_years"]:
        dataset = dataset.exclude(data["exclude_years"])

    seed = data.get("seed", settings.PERMSEL_SEED)
    options = ScoringOptions.from_settings(
        aicc_convention=data.get("aicc_convention"),
        forecast_scale=data.get("forecast_scale"),
        forecast_samples=data.get("forecast_samples"),
        kde_bandwidth=data.get("kde_bandwidth"),
        seed=seed,
    )
    return RunConfig(
        dataset_name=data["dataset"],
        dataset=dataset,
        dataset_sha256=hashlib.sha256(dataset_path.read_bytes()).hexdigest(),
        models=models,
        statistics=tuple(StatisticKind(k) for k in data["statistics"]),
        permutations=data.get("permutations", settings.PERMSEL_PERMUTATIONS),
        seed=seed,
        output_dir=Path(base_dir) / data.get("output_dir", "results"),
        add_one=data.get("add_one", settings.PERMSEL_ADD_ONE),
        options=options,
        drop_best=data["drop_best"],
        exclude_years=tuple(sorted(data["exclude_years"])),
        influence_threshold=data.get("influence_threshold", settings.PERMSEL_INFLUENCE_THRESHOLD),
    )


def load_run_config(path: Path | str, **overrides) -> RunConfig:
    """Read a JSON configuration file; the dataset path is relative to the file."""
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"configuration file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path.name}: line {exc.lineno}: {exc.msg}") from None
    config = parse_run_config(document, path.parent, **overrides)
    logger.info(
        "config %s: %d models, statistics %s, J=%d, seed %d",
        path.name, len(config.models), ",".join(config.statistics), config.permutations, config.seed,
    )
    return config


# ---------- provenance and bundles ----------

@dataclass(frozen=True)
class Provenance:
    version: str
    seed: int
    permutations: int
    statistics: list[str]
    config_sha256: str
    dataset_sha256: str
    config: dict

    @classmethod
    def of(cls, config: RunConfig) -> "Provenance":
        return cls(
            version=settings.PERMSEL_VERSION,
            seed=config.seed,
            permutations=config.permutations,
            statistics=[k.value for k in config.statistics],
            config_sha256=config.config_sha256(),
            dataset_sha256=config.dataset_sha256,
            config=config.canonical(),
        )


@dataclass(frozen=True)
class KindResult:
    """Score table, selection test and ECDF for one statistic kind."""

    kind: StatisticKind
    table: list[ScoreTableRow]
    selection: PermTestResult | None
    # rows of (statistic, delta vs null, cumulative fraction) over the permutation minima
    ecdf: list[list[float]] | None = None


@dataclass(frozen=True)
class ResultsBundle:
    results: list[KindResult]
    provenance: Provenance
    first_year: int
    last_year: int
    dropped_models: list[str] = field(default_factory=list)

    def result(self, kind: StatisticKind | str) -> KindResult:
        kind = StatisticKind(kind)
        return next(r for r in self.results if r.kind == kind)


# ---------- fit ----------

@dataclass(frozen=True)
class ForecastSummary:
    year: int
    origin_count: float
    mean: float
    median: float
    q05: float
    q95: float
    bandwidth: float


@dataclass(frozen=True)
class ModelFit:
    model_id: str
    family: str
    k_params: int | None = None
    loglik: float | None = None
    sigma2: float | None = None
    coefficients: dict[str, float] = field(default_factory=dict)
    aic: float | None = None
    aicc: float | None = None
    years: tuple[int, ...] = ()
    cooks: tuple[float, ...] | None = None
    influential_years: tuple[int, ...] = ()
    forecast: ForecastSummary | None = None
    error: str | None = None
    note: str | None = None


def _fit_one(model: ModelSpec, config: RunConfig, forecast: bool, threads: int) -> ModelFit:
    dataset = config.dataset
    design, y = build_design(model, dataset)
    fitted = fit_linear_gaussian(design, y, k_params=model.k_override)
    n = design.rows
    try:
        aicc_value = float(aicc(fitted.loglik, fitted.k_params, n, config.options.aicc_convention))
    except SmallSample:
        aicc_value = None
    years = tuple(int(v) for v in dataset.transition_years())
    note = None
    try:
        cooks = tuple(float(d) for d in cooks_distance(design, y))
        flagged = influential_observations(design, y, config.influence_threshold)
        influential = tuple(years[i] for i in flagged)
    except LeverageOne as exc:
        cooks, influential, note = None, (), f"LeverageOne: {exc}"

    summary = None
    if forecast:
        last = int(dataset.years[-1])
        sample = monte_carlo_forecast(
            fitted,
            predictor_row(model, dataset, last),
            float(dataset.counts[-1]),
            S=config.options.forecast_samples,
            seed=config.seed,
            bandwidth=config.options.kde_bandwidth,
            threads=threads,
        )
        q05, median, q95 = sample.quantiles([0.05, 0.5, 0.95])
        summary = ForecastSummary(
            year=last + 1,
            origin_count=sample.origin_count,
            mean=float(np.mean(sample.samples)),
            median=float(median),
            q05=float(q05),
            q95=float(q95),
            bandwidth=float(sample.kde_bandwidth),
        )
    return ModelFit(
        model_id=model.model_id,
        family=model.family.value,
        k_params=fitted.k_params,
        loglik=fitted.loglik,
        sigma2=fitted.sigma2,
        coefficients=dict(zip(fitted.names, map(float, fitted.coefficients))),
        aic=float(aic(fitted.loglik, fitted.k_params)),
        aicc=aicc_value,
        years=years,
        cooks=cooks,
        influential_years=influential,
        forecast=summary,
        note=note,
    )


def run_fit(config: RunConfig, *, forecast: bool = False, threads: int = 1) -> list[ModelFit]:
    """Fit every model once: coefficients, criteria, Cook's distances, optional forecast."""
    fits = []
    for model in with_null_model(config.models):
        try:
            fits.append(_fit_one(model, config, forecast, threads))
        except SelectionError as exc:
            logger.warning("model %s could not be fitted (%s): %s",
                           model.model_id, type(exc).__name__, exc)
            fits.append(ModelFit(
                model_id=model.model_id,
                family=model.family.value,
                error=f"{type(exc).__name__}: {exc}",
            ))
    flagged = sorted({year for f in fits for year in f.influential_years})
    if flagged:
        logger.info("influential years (Cook's distance): %s", flagged)
    return fits


# ---------- permutation tests ----------

@dataclass(frozen=True)
class _KindRun:
    table: list[ScoreTableRow]
    models: list[ModelSpec]
    run: PermutationRun


def _permute_kind(
    models: Sequence[ModelSpec], config: RunConfig, kind: StatisticKind, threads: int
) -> _KindRun:
    """Score table plus one shared permutation run over the models that could be scored."""
    table = build_score_table(models, config.dataset, kind, config.options)
    scored = {row.model_id for row in table if not row.failed}
    usable = [m for m in with_null_model(models) if m.model_id in scored]
    candidates, y, origins = prepare_candidates(usable, config.dataset)
    run = run_permutations(
        candidates,
        y,
        kind,
        J=config.permutations,
        seed=config.seed,
        options=config.options,
        origins=origins,
        threads=threads,
        add_one=config.add_one,
        null_flags=[m.is_null for m in usable],
    )
    logger.info("%s: %d models x %d permutations done", kind.title, run.m, run.J)
    return _KindRun(table=table, models=usable, run=run)


def _with_p_values(kind_run: _KindRun) -> list[ScoreTableRow]:
    """Attach single-model and Westfall-Young p-values to every non-null row."""
    run = kind_run.run
    tested = [i for i, m in enumerate(kind_run.models) if not m.is_null]
    if not tested:
        return kind_run.table
    adjusted = dict(zip(tested, run.subset(tested).westfall_young()))
    index = {label: i for i, label in enumerate(run.labels)}
    rows = []
    for row in kind_run.table:
        i = index.get(row.model_id)
        if row.failed or row.is_null or i is None:
            rows.append(row)
            continue
        single = run.single(i)
        rows.append(row.with_p_values(
            p_value=single.p_value,
            adjusted_p_value=float(adjusted[i]),
            exceed_count=single.exceed_count,
        ))
    return rows


@dataclass(frozen=True)
class PermtestRow:
    model_id: str
    observed: float
    exceed_count: int
    permutations: int
    p_value: float
    adjusted_p_value: float
    failed_refits: int


def run_permtests(config: RunConfig, threads: int = 1) -> dict[StatisticKind, list[PermtestRow]]:
    """Single-model permutation test of every non-null model, per statistic kind."""
    out = {}
    for kind in config.statistics:
        kind_run = _permute_kind(config.models, config, kind, threads)
        rows = [r for r in _with_p_values(kind_run) if r.p_value is not None]
        index = {label: i for i, label in enumerate(kind_run.run.labels)}
        failures = kind_run.run.failures()
        out[kind] = [
            PermtestRow(
                model_id=r.model_id,
                observed=r.statistic.value,
                exceed_count=r.exceed_count,
                permutations=kind_run.run.J,
                p_value=r.p_value,
                adjusted_p_value=r.adjusted_p_value,
                failed_refits=int(failures[index[r.model_id]]),
            )
            for r in sorted(rows, key=lambda r: r.model_id)
        ]
        if not out[kind]:
            logger.warning("%s: no non-null model to test", kind.title)
    return out


def _ecdf(selection: PermTestResult, null_value: float) -> list[list[float]]:
    minima = np.sort(selection.per_perm_stats[np.isfinite(selection.per_perm_stats)])
    J = selection.permutation_count
    return [[float(v), float(v - null_value), (i + 1) / J] for i, v in enumerate(minima)]


def _dropped(config: RunConfig) -> list[str]:
    if not config.drop_best:
        return []
    first = build_score_table(config.models, config.dataset, config.statistics[0], config.options)
    ranked = [row.model_id for row in first if not row.failed and not row.is_null]
    return ranked[: config.drop_best]


def run_selection(config: RunConfig, threads: int = 1) -> ResultsBundle:
    """Score tables, single-model and selection permutation tests for every kind."""
    dropped = _dropped(config)
    if dropped:
        logger.info("dropping the %d best models by %s: %s",
                    len(dropped), config.statistics[0].title, dropped)
    models = [m for m in config.models if m.model_id not in dropped]

    results = []
    for kind in config.statistics:
        kind_run = _permute_kind(models, config, kind, threads)
        selection = kind_run.run.selection(keep_stats=True)
        if selection.degenerate:
            logger.warning("%s: selection test over the null model only is degenerate (p = %g)",
                           kind.title, selection.p_value)
        null_row = next(r for r in kind_run.table if r.is_null)
        results.append(KindResult(
            kind=kind,
            table=_with_p_values(kind_run),
            selection=selection,
            ecdf=_ecdf(selection, null_row.statistic.value),
        ))
        logger.info("%s: best %s, selection p = %.4f",
                    kind.title, selection.best_model, selection.p_value)
    return ResultsBundle(
        results=results,
        provenance=Provenance.of(config),
        first_year=int(config.dataset.years[0]),
        last_year=int(config.dataset.years[-1]),
        dropped_models=dropped,
    )
