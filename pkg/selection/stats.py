"""Gaussian linear model kernel.

Ordinary least squares through a pivoted QR decomposition, the Gaussian
log-likelihood at the maximum, and Cook's distance. `LeastSquaresFactor`
keeps the decomposition of one design so that many response vectors (one per
permutation) can be fitted with two matrix products.
"""

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike
from scipy import linalg

from .exceptions import (
    DataError,
    LengthMismatch,
    LeverageOne,
    PerfectFit,
    RankDeficient,
)

logger = logging.getLogger(__name__)

# smallest |R_jj| relative to the largest before columns count as collinear
RANK_TOLERANCE = 1e-10
# RSS/n relative to var(y) below which the likelihood is treated as unbounded
PERFECT_FIT_TOLERANCE = 1e-12
# leverages this close to one make Cook's distance undefined
LEVERAGE_TOLERANCE = 1e-10

_EPS = np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Regressor matrix (rows = observations, intercept column first)."""

    values: np.ndarray
    names: tuple[str, ...] = ()

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise DataError(f"design must be a non-empty 2-D matrix, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DataError("design contains non-finite values")
        if self.names and len(self.names) != values.shape[1]:
            raise DataError("design column names do not match the column count")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", tuple(self.names))

    @classmethod
    def intercept(cls, rows: int) -> "DesignMatrix":
        return cls(np.ones((rows, 1)), names=("intercept",))

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def columns(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class FittedModel:
    """Maximum-likelihood Gaussian linear model."""

    coefficients: np.ndarray
    sigma2: float
    loglik: float
    n_obs: int
    k_params: int
    rss: float
    names: tuple[str, ...] = ()

    def predict(self, predictor_row: ArrayLike) -> float:
        """Mean of the predictive Gaussian at one predictor row."""
        return float(np.dot(np.asarray(predictor_row, dtype=float), self.coefficients))


def gaussian_loglik(rss, n: int):
    """Log-likelihood at the MLE, -(n/2)(ln(2*pi*RSS/n) + 1). Works elementwise."""
    return -0.5 * n * (np.log(2.0 * np.pi * np.asarray(rss) / n) + 1.0)


def perfect_fit_mask(rss, y: np.ndarray) -> np.ndarray:
    """True where RSS/n is negligible against the spread of the response column(s).

    `y` is (n,) or (n, J); the floor keeps exactly constant responses flagged
    even when rounding leaves a residual of a few ulps.
    """
    n = y.shape[0]
    spread = np.var(y, axis=0)
    scale = np.max(np.abs(y), axis=0)
    floor = (64.0 * _EPS * scale) ** 2
    return np.asarray(rss) / n <= np.maximum(PERFECT_FIT_TOLERANCE * spread, floor)


def as_response(y: ArrayLike, rows: int) -> np.ndarray:
    """Coerce a response vector and check it against the design row count."""
    arr = np.asarray(y, dtype=float)
    if arr.ndim != 1:
        raise LengthMismatch(f"response must be a vector, got shape {arr.shape}")
    if arr.shape[0] != rows:
        raise LengthMismatch(f"design has {rows} rows but response has {arr.shape[0]} values")
    if not np.all(np.isfinite(arr)):
        raise DataError("response contains non-finite values")
    return arr


class LeastSquaresFactor:
    """Pivoted QR factorisation of a design, reusable across responses.

    Raises RankDeficient when the design does not have full column rank.
    """

    def __init__(self, design: DesignMatrix):
        self.design = design
        n, p = design.rows, design.columns
        if n < p:
            raise RankDeficient(f"{p} columns cannot be estimated from {n} rows")
        q, r, perm = linalg.qr(design.values, mode="economic", pivoting=True)
        diag = np.abs(np.diag(r))
        if diag[0] == 0.0 or diag.min() < RANK_TOLERANCE * diag.max():
            raise RankDeficient(
                f"design columns are collinear (|R| ratio {diag.min() / max(diag.max(), _EPS):.2e})"
            )
        self._q = q
        self._r = r
        self._perm = perm

    @property
    def n_obs(self) -> int:
        return self.design.rows

    @property
    def n_coef(self) -> int:
        return self.design.columns

    @cached_property
    def leverages(self) -> np.ndarray:
        """Diagonal of the hat matrix."""
        return np.einsum("ij,ij->i", self._q, self._q)

    def coefficients(self, y: np.ndarray) -> np.ndarray:
        """Least-squares coefficients for a response vector or an (n, J) block."""
        solved = linalg.solve_triangular(self._r, self._q.T @ y)
        beta = np.empty_like(solved)
        beta[self._perm] = solved
        return beta

    def residuals(self, y: np.ndarray) -> np.ndarray:
        """y - X beta for a response vector or column-wise for an (n, J) block."""
        return y - self._q @ (self._q.T @ y)

    def rss(self, y: np.ndarray):
        e = self.residuals(y)
        return np.einsum("i...,i...->...", e, e)

    def fit(self, y: ArrayLike, k_params: int | None = None) -> FittedModel:
        """Maximum-likelihood fit; raises PerfectFit when the likelihood is unbounded."""
        y = as_response(y, self.n_obs)
        n = self.n_obs
        rss = float(self.rss(y))
        if perfect_fit_mask(rss, y):
            raise PerfectFit(f"residual sum of squares {rss:.3e} is zero to tolerance")
        k = self.n_coef + 1 if k_params is None else int(k_params)
        if k < 1:
            raise ValueError(f"k_params must be at least 1, got {k}")
        coefficients = self.coefficients(y)
        return FittedModel(
            coefficients=coefficients,
            sigma2=rss / n,
            loglik=float(gaussian_loglik(rss, n)),
            n_obs=n,
            k_params=k,
            rss=rss,
            names=self.design.names,
        )


def fit_linear_gaussian(
    design: DesignMatrix, y: ArrayLike, k_params: int | None = None
) -> FittedModel:
    """Fit y = X beta + N(0, sigma2) by least squares.

    `k_params` defaults to the number of coefficients plus one for the variance.
    """
    y = as_response(y, design.rows)
    return LeastSquaresFactor(design).fit(y, k_params=k_params)


def cooks_distance(design: DesignMatrix, y: ArrayLike) -> np.ndarray:
    """Cook's distance D_i = e_i^2 / (p s^2) * h_i / (1 - h_i)^2 for every row."""
    y = as_response(y, design.rows)
    factor = LeastSquaresFactor(design)
    fitted = factor.fit(y)
    n, p = factor.n_obs, factor.n_coef
    h = factor.leverages
    if np.any(h >= 1.0 - LEVERAGE_TOLERANCE):
        rows = np.flatnonzero(h >= 1.0 - LEVERAGE_TOLERANCE).tolist()
        raise LeverageOne(f"rows {rows} have leverage one")
    e = factor.residuals(y)
    s2 = fitted.rss / (n - p)
    return e**2 / (p * s2) * h / (1.0 - h) ** 2


def influential_observations(
    design: DesignMatrix, y: ArrayLike, threshold: float | None = None
) -> np.ndarray:
    """Indices of rows whose Cook's distance exceeds `threshold` (default 4/n)."""
    distances = cooks_distance(design, y)
    cut = 4.0 / design.rows if threshold is None else threshold
    return np.flatnonzero(distances > cut)
