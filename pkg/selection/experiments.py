"""Type-I error inflation of naive best-model testing (Experiment 1).

Every repeat draws iid N(0,1) outcomes and predictors, so no candidate model
is informative. The best model (by AICc unless configured otherwise) is
tested on its own (naive test) and the whole selection is tested with the
model-selection permutation test; both share one permutation set per
repeat. Rejection rates over the repeats are compared with the binomial band
around alpha.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np

from .exceptions import ConfigError
from .permute import Candidate, run_permutations
from .rng import derived_seed, substream
from .scoring import ScoringOptions, StatisticKind
from .stats import DesignMatrix

logger = logging.getLogger(__name__)

DEFAULT_GRID = (1, 2, 3, 7, 15, 31)
_Z975 = 1.96


@dataclass(frozen=True)
class IndependentCase:
    """n single-predictor models, each on its own variable."""

    n_models: int

    @property
    def n_variables(self) -> int:
        return self.n_models

    @property
    def max_predictors(self) -> int:
        return 1

    def label(self) -> str:
        return "independent"


@dataclass(frozen=True)
class DependentCase:
    """n distinct non-empty subsets of k shared variables."""

    k: int
    n_models: int

    @property
    def n_variables(self) -> int:
        return self.k

    @property
    def max_predictors(self) -> int:
        return self.k

    def label(self) -> str:
        return f"dependent(k={self.k})"


@dataclass(frozen=True)
class Experiment1Config:
    case: IndependentCase | DependentCase
    n_outcomes: int = 20
    repeats: int = 256
    alpha: float = 0.05
    permutations: int = 512
    seed: int = 0
    statistic: StatisticKind = StatisticKind.AICC

    def __post_init__(self):
        object.__setattr__(self, "statistic", StatisticKind(self.statistic))
        if self.case.n_models < 1:
            raise ConfigError("n_models must be at least 1")
        if isinstance(self.case, DependentCase):
            if self.case.k < 1:
                raise ConfigError("k must be at least 1")
            if self.case.n_models > 2**self.case.k - 1:
                raise ConfigError(
                    f"only {2**self.case.k - 1} distinct models exist for k={self.case.k}, "
                    f"asked for {self.case.n_models}"
                )
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.repeats < 1 or self.permutations < 1:
            raise ConfigError("repeats and permutations must be at least 1")
        # AICc needs n - K - 1 >= 1 for the largest model, K = predictors + 2
        if self.n_outcomes < self.case.max_predictors + 4:
            raise ConfigError(
                f"{self.n_outcomes} outcomes are too few for "
                f"models with {self.case.max_predictors} predictor(s)"
            )
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")

    def with_n_models(self, n_models: int) -> "Experiment1Config":
        return replace(self, case=replace(self.case, n_models=n_models))


@dataclass(frozen=True)
class Experiment1Result:
    naive_reject_rate: float
    selection_test_reject_rate: float
    binomial_band: tuple[float, float]
    naive_rejections: int
    selection_rejections: int
    repeats: int
    n_models: int
    case: str


def binomial_band(R: int, alpha: float) -> tuple[float, float]:
    """Central 95% normal-approximation interval of a Binomial(R, alpha) proportion."""
    if R < 1:
        raise ValueError(f"R must be at least 1, got {R}")
    half = _Z975 * math.sqrt(alpha * (1.0 - alpha) / R)
    return max(0.0, alpha - half), min(1.0, alpha + half)


def _subsets(case, rng: np.random.Generator) -> list[list[int]]:
    if isinstance(case, IndependentCase):
        return [[i] for i in range(case.n_models)]
    masks = rng.choice(2**case.k - 1, size=case.n_models, replace=False) + 1
    return [[b for b in range(case.k) if (int(mask) >> b) & 1] for mask in masks]


def _one_repeat(config: Experiment1Config, repeat: int, options: ScoringOptions) -> tuple[bool, bool]:
    rng = substream(config.seed, "experiment", repeat)
    n = config.n_outcomes
    y = rng.standard_normal(n)
    X = rng.standard_normal((n, config.case.n_variables))
    ones = np.ones((n, 1))
    candidates = [
        Candidate.from_design(
            "+".join(f"X{c + 1}" for c in subset),
            DesignMatrix(np.hstack([ones, X[:, subset]])),
        )
        for subset in _subsets(config.case, rng)
    ]
    run = run_permutations(
        candidates,
        y,
        config.statistic,
        J=config.permutations,
        seed=derived_seed(config.seed, "experiment", repeat),
        options=options,
    )
    best = int(np.argmin(run.observed))
    naive = run.single(best).p_value < config.alpha
    selection = run.selection().p_value < config.alpha
    return naive, selection


def run_experiment1(config: Experiment1Config, threads: int = 1) -> Experiment1Result:
    """Naive and selection-test rejection rates over `config.repeats` null repeats."""
    options = ScoringOptions()

    def work(repeat: int) -> tuple[bool, bool]:
        return _one_repeat(config, repeat, options)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(work, range(config.repeats)))
    else:
        outcomes = [work(r) for r in range(config.repeats)]

    naive = sum(o[0] for o in outcomes)
    selection = sum(o[1] for o in outcomes)
    result = Experiment1Result(
        naive_reject_rate=naive / config.repeats,
        selection_test_reject_rate=selection / config.repeats,
        binomial_band=binomial_band(config.repeats, config.alpha),
        naive_rejections=naive,
        selection_rejections=selection,
        repeats=config.repeats,
        n_models=config.case.n_models,
        case=config.case.label(),
    )
    logger.info(
        "experiment 1 %s, %d models: naive %.4f, selection %.4f",
        result.case, result.n_models, result.naive_reject_rate, result.selection_test_reject_rate,
    )
    return result


def run_experiment1_grid(
    config: Experiment1Config, n_models_values: Iterable[int] = DEFAULT_GRID, threads: int = 1
) -> list[Experiment1Result]:
    """One result per n_models value; rows are ready for plotting rate against n_models."""
    return [run_experiment1(config.with_n_models(n), threads=threads) for n in n_models_values]
