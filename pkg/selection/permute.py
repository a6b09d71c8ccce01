"""Permutation tests for model-selection statistics.

The outcomes are shuffled with derangements (no outcome keeps its position)
while the predictors stay fixed. For each derangement every candidate model
is refitted and scored; from the resulting (J, m) matrix of statistics we get
- the single-model test of each candidate,
- the model-selection test of the best (minimum) statistic,
- Westfall-Young adjusted p-values.

Derangement j is drawn from its own substream keyed by (seed, j), and work is
split into fixed-size blocks, so results are identical for any thread count.
"""

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from django.conf import settings

from .exceptions import ConfigError, NoDerangement
from .popmodel import ModelSpec, TimeSeriesDataset, build_design, transition_origins
from .rng import substream
from .scoring import (
    ScoringOptions,
    StatisticKind,
    model_statistic,
    statistic_values,
)
from .stats import DesignMatrix, LeastSquaresFactor

logger = logging.getLogger(__name__)

# permuted statistics within this relative distance of the observed one are ties
TIE_TOLERANCE = 1e-9
# permutations evaluated together; part of the result's identity, do not tune per run
BLOCK_SIZE = 256


# ---------- derangements ----------

@dataclass(frozen=True, eq=False)
class Derangement:
    """Fixed-point-free permutation; `mapping[i]` is the source index for slot i (0-based)."""

    mapping: np.ndarray

    def __post_init__(self):
        mapping = np.asarray(self.mapping, dtype=np.intp)
        n = mapping.size
        if mapping.ndim != 1 or not np.array_equal(np.sort(mapping), np.arange(n)):
            raise ValueError("mapping is not a permutation")
        if np.any(mapping == np.arange(n)):
            raise ValueError("mapping has fixed points")
        mapping.setflags(write=False)
        object.__setattr__(self, "mapping", mapping)

    @property
    def n(self) -> int:
        return self.mapping.size

    def one_based(self) -> tuple[int, ...]:
        return tuple(int(i) + 1 for i in self.mapping)

    def apply(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(y)[self.mapping]


def random_derangement(n: int, rng: np.random.Generator) -> Derangement:
    """Uniform derangement by rejection of uniform permutations (about 1/e accepted)."""
    if n < 2:
        raise NoDerangement(f"no derangement of {n} element(s)")
    identity = np.arange(n)
    while True:
        candidate = rng.permutation(n)
        if not np.any(candidate == identity):
            return Derangement(candidate)


def all_derangements(n: int) -> list[Derangement]:
    """Every derangement of size n in lexicographic order."""
    if n < 2:
        raise NoDerangement(f"no derangement of {n} element(s)")
    return [
        Derangement(np.array(p))
        for p in itertools.permutations(range(n))
        if all(p[i] != i for i in range(n))
    ]


def derangement_for(n: int, seed: int, index: int) -> Derangement:
    """Derangement number `index` of the stream for `seed`."""
    return random_derangement(n, substream(seed, "derangement", index))


def derangement_stream(n: int, J: int, seed: int) -> list[Derangement]:
    """The J derangements a test with this seed uses, drawn with replacement."""
    return [derangement_for(n, seed, j) for j in range(J)]


# ---------- candidates ----------

@dataclass(frozen=True, eq=False)
class Candidate:
    """A model ready for repeated scoring: label, factorised design, K override."""

    label: str
    factor: LeastSquaresFactor
    k_params: int | None = None

    @classmethod
    def from_design(cls, label: str, design: DesignMatrix, k_params: int | None = None):
        return cls(label=label, factor=LeastSquaresFactor(design), k_params=k_params)


def prepare_candidates(
    models: Sequence[ModelSpec], dataset: TimeSeriesDataset
) -> tuple[list[Candidate], np.ndarray, np.ndarray]:
    """Candidates, shared response and transition origins for a model set."""
    if not models:
        raise ConfigError("at least one model is required")
    candidates = []
    response = None
    for model in models:
        design, y = build_design(model, dataset)
        response = y if response is None else response
        candidates.append(Candidate.from_design(model.model_id, design, model.k_override))
    return candidates, response, transition_origins(dataset)


# ---------- results ----------

def beats(values, reference: float):
    """values strictly better than `reference`, ties within TIE_TOLERANCE excluded."""
    return np.asarray(values) < reference - TIE_TOLERANCE * max(1.0, abs(reference))


def p_value_from_count(count: int, J: int, add_one: bool = False) -> float:
    return (count + 1) / (J + 1) if add_one else count / J


@dataclass(frozen=True, eq=False)
class PermTestResult:
    """Outcome of one permutation test."""

    observed_stat: float
    permutation_count: int
    exceed_count: int
    seed: int | None
    kind: StatisticKind
    per_perm_stats: np.ndarray | None = None
    failed_refits: int = 0
    add_one: bool = False
    model_ids: tuple[str, ...] = ()
    best_model: str | None = None
    degenerate: bool = False

    def __post_init__(self):
        if not 0 <= self.exceed_count <= self.permutation_count:
            raise ValueError("exceed count outside [0, J]")

    @property
    def p_value(self) -> float:
        return p_value_from_count(self.exceed_count, self.permutation_count, self.add_one)


@dataclass(frozen=True, eq=False)
class PermutationRun:
    """Observed statistics (m,) and permuted statistics (J, m) of one model set.

    Failed permuted refits are stored as +inf, which never beats anything.
    """

    labels: tuple[str, ...]
    kind: StatisticKind
    observed: np.ndarray
    permuted: np.ndarray
    seed: int | None
    add_one: bool = False
    null_flags: tuple[bool, ...] = field(default=())

    @property
    def J(self) -> int:
        return self.permuted.shape[0]

    @property
    def m(self) -> int:
        return self.permuted.shape[1]

    def failures(self) -> np.ndarray:
        return np.sum(~np.isfinite(self.permuted), axis=0)

    def exceed_counts(self) -> np.ndarray:
        return np.array(
            [int(np.sum(beats(self.permuted[:, i], self.observed[i]))) for i in range(self.m)]
        )

    def single(self, index: int, keep_stats: bool = False) -> PermTestResult:
        column = self.permuted[:, index]
        return PermTestResult(
            observed_stat=float(self.observed[index]),
            permutation_count=self.J,
            exceed_count=int(np.sum(beats(column, self.observed[index]))),
            seed=self.seed,
            kind=self.kind,
            per_perm_stats=column.copy() if keep_stats else None,
            failed_refits=int(np.sum(~np.isfinite(column))),
            add_one=self.add_one,
            model_ids=(self.labels[index],),
            best_model=self.labels[index],
        )

    def selection(self, keep_stats: bool = False) -> PermTestResult:
        observed_min = float(np.min(self.observed))
        best = int(np.argmin(self.observed))
        minima = np.min(self.permuted, axis=1)
        null_only = bool(self.null_flags) and all(self.null_flags)
        return PermTestResult(
            observed_stat=observed_min,
            permutation_count=self.J,
            exceed_count=int(np.sum(beats(minima, observed_min))),
            seed=self.seed,
            kind=self.kind,
            per_perm_stats=minima if keep_stats else None,
            failed_refits=int(np.sum(self.failures())),
            add_one=self.add_one,
            model_ids=self.labels,
            best_model=self.labels[best],
            degenerate=null_only,
        )

    def westfall_young(self) -> np.ndarray:
        """Adjusted p: share of permutations whose smallest per-model p is below p_i.

        Per-permutation p-values rank each permuted statistic against the same
        permutation distribution of its model.
        """
        ordered = np.sort(self.permuted, axis=0)
        ranks = np.column_stack([
            np.searchsorted(ordered[:, i], self.permuted[:, i], side="left")
            for i in range(self.m)
        ])
        min_counts = ranks.min(axis=1)
        raw_counts = self.exceed_counts()
        adjusted = np.array([int(np.sum(min_counts < c)) for c in raw_counts])
        return np.array([p_value_from_count(c, self.J, self.add_one) for c in adjusted])

    def subset(self, indices: Sequence[int]) -> "PermutationRun":
        indices = list(indices)
        return PermutationRun(
            labels=tuple(self.labels[i] for i in indices),
            kind=self.kind,
            observed=self.observed[indices],
            permuted=self.permuted[:, indices],
            seed=self.seed,
            add_one=self.add_one,
            null_flags=tuple(self.null_flags[i] for i in indices) if self.null_flags else (),
        )


# ---------- engine ----------

def _resolve(J, seed, derangements, n):
    if derangements is not None:
        derangements = list(derangements)
        if not derangements:
            raise ConfigError("an explicit derangement set must not be empty")
        if any(d.n != n for d in derangements):
            raise ConfigError(f"derangements must all have size {n}")
        return len(derangements), None, derangements
    J = settings.PERMSEL_PERMUTATIONS if J is None else int(J)
    if J < 1:
        raise ConfigError(f"the permutation count must be at least 1, got {J}")
    if n < 2:
        raise NoDerangement(f"no derangement of {n} element(s)")
    seed = settings.PERMSEL_SEED if seed is None else int(seed)
    return J, seed, None


def run_permutations(
    candidates: Sequence[Candidate],
    y: np.ndarray,
    kind: StatisticKind,
    *,
    J: int | None = None,
    seed: int | None = None,
    derangements: Sequence[Derangement] | None = None,
    options: ScoringOptions | None = None,
    origins: np.ndarray | None = None,
    threads: int = 1,
    add_one: bool = False,
    null_flags: Sequence[bool] = (),
) -> PermutationRun:
    """Score every candidate on the observed outcomes and under J shared derangements.

    Errors on the observed ordering propagate; failed permuted refits become +inf.
    """
    kind = StatisticKind(kind)
    options = options or ScoringOptions()
    y = np.asarray(y, dtype=float)
    n = y.size
    J, seed, explicit = _resolve(J, seed, derangements, n)

    observed = np.array([
        model_statistic(c.factor, y, kind, k_params=c.k_params, options=options, origins=origins).value
        for c in candidates
    ])

    def evaluate(block: int) -> np.ndarray:
        start = block * BLOCK_SIZE
        stop = min(start + BLOCK_SIZE, J)
        if explicit is not None:
            chosen = explicit[start:stop]
        else:
            chosen = [derangement_for(n, seed, j) for j in range(start, stop)]
        Y = y[np.stack([d.mapping for d in chosen], axis=1)]
        out = np.empty((stop - start, len(candidates)))
        for i, candidate in enumerate(candidates):
            values, _, _ = statistic_values(
                candidate.factor, Y, kind, k_params=candidate.k_params,
                options=options, origins=origins,
            )
            out[:, i] = values
        logger.debug("permutations %d-%d scored", start, stop - 1)
        return out

    blocks = range((J + BLOCK_SIZE - 1) // BLOCK_SIZE)
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(evaluate, blocks))
    else:
        parts = [evaluate(b) for b in blocks]
    permuted = np.vstack(parts)

    run = PermutationRun(
        labels=tuple(c.label for c in candidates),
        kind=kind,
        observed=observed,
        permuted=permuted,
        seed=seed,
        add_one=add_one,
        null_flags=tuple(null_flags),
    )
    failed = int(np.sum(run.failures()))
    if failed:
        logger.warning("%d permuted refits failed and were scored as non-exceedance", failed)
    logger.debug("%s: %d models x %d permutations done", kind.title, run.m, J)
    return run


def _run_for_models(models, dataset, kind, J, seed, **kwargs) -> PermutationRun:
    candidates, y, origins = prepare_candidates(models, dataset)
    return run_permutations(
        candidates, y, kind, J=J, seed=seed, origins=origins,
        null_flags=[m.is_null for m in models], **kwargs,
    )


def single_model_perm_test(
    model: ModelSpec,
    dataset: TimeSeriesDataset,
    kind: StatisticKind,
    J: int | None = None,
    seed: int | None = None,
    *,
    keep_stats: bool = False,
    **kwargs,
) -> PermTestResult:
    """p = share of derangements whose refitted statistic beats the observed one."""
    run = _run_for_models([model], dataset, kind, J, seed, **kwargs)
    return run.single(0, keep_stats=keep_stats)


def selection_perm_test(
    models: Sequence[ModelSpec],
    dataset: TimeSeriesDataset,
    kind: StatisticKind,
    J: int | None = None,
    seed: int | None = None,
    *,
    keep_stats: bool = False,
    **kwargs,
) -> PermTestResult:
    """p = share of derangements whose best statistic beats the observed best."""
    run = _run_for_models(models, dataset, kind, J, seed, **kwargs)
    result = run.selection(keep_stats=keep_stats)
    if result.degenerate:
        logger.warning("selection test over null models only is degenerate (p = 0)")
    return result


def westfall_young_adjusted(
    models: Sequence[ModelSpec],
    dataset: TimeSeriesDataset,
    J: int | None = None,
    seed: int | None = None,
    kind: StatisticKind = StatisticKind.AIC,
    **kwargs,
) -> np.ndarray:
    """Westfall-Young adjusted p-value of each model, in input order."""
    run = _run_for_models(models, dataset, kind, J, seed, **kwargs)
    return run.westfall_young()
