"""scikit-learn style wrappers around the exponent and dimension estimators.

The functional API in :mod:`soupfall.estimate` is the reference; these classes
add ``fit``/``predict``/``transform`` plumbing, ``get_params`` and input
validation so the estimators compose with sklearn tooling.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .estimate import PTable, box_counts, box_dimension, estimate_p, fit_alpha
from .exceptions import InvalidSpecError
from .soup import ShapeMeasure


def _as_table(X) -> PTable:
    X = check_array(X, dtype=float)
    if X.shape[1] != 3:
        raise InvalidSpecError(f"expected columns (eps, trials, successes), got {X.shape[1]} columns")
    if np.any(X[:, 1:] != np.round(X[:, 1:])):
        raise InvalidSpecError("trials and successes must be integers")
    return PTable(X[:, 0], X[:, 1].astype(np.int64), X[:, 2].astype(np.int64))


def _eps_column(X) -> np.ndarray:
    X = check_array(np.asarray(X, dtype=float).reshape(-1, 1) if np.ndim(X) == 1 else X,
                    dtype=float)
    return X[:, 0]


class CrossingExponent(RegressorMixin, BaseEstimator):
    """Power-law fit ``p(eps) ~ A eps^alpha`` of a crossing-probability table.

    ``fit`` takes rows ``(eps, trials, successes)``; ``predict`` returns the
    fitted probability at each eps (capped at 1).
    """

    def fit(self, X, y=None):
        rep = fit_alpha(_as_table(X))
        self.alpha_ = rep.alpha_hat
        self.stderr_ = rep.stderr
        self.r2_ = rep.r2
        self.dimension_ = rep.dim_hat
        self.bracket_ok_ = rep.bracket_ok
        self.intercept_ = rep.intercept
        self.report_ = rep
        return self

    def predict(self, X):
        check_is_fitted(self, "alpha_")
        eps = _eps_column(X)
        return np.minimum(np.exp(self.intercept_) * eps ** self.alpha_, 1.0)

    def score(self, X, y=None, sample_weight=None):
        """Weighted r2 of the log-log fit on the table ``X``."""
        return fit_alpha(_as_table(X)).r2


class BoxCountingDimension(TransformerMixin, BaseEstimator):
    """Box-counting dimension of boolean rasters.

    ``X`` is one 2-D mask or a stack of masks of equal shape; counts are
    averaged over the stack before the fit. Box side ``k`` cells has scale
    ``k * pitch``.
    """

    def __init__(self, factors=(2, 4, 8, 16, 32), pitch: float = 1.0):
        self.factors = factors
        self.pitch = pitch

    def _stack(self, X):
        X = np.asarray(X)
        if X.ndim == 2:
            X = X[None]
        if X.ndim != 3:
            raise InvalidSpecError(f"expected a 2-D mask or a stack of masks, got ndim={X.ndim}")
        return X.astype(bool)

    def transform(self, X):
        """Occupied box counts, one row per mask and one column per factor."""
        return np.array([box_counts(m, self.factors) for m in self._stack(X)])

    def fit(self, X, y=None):
        if self.pitch <= 0:
            raise InvalidSpecError(f"pitch must be positive, got {self.pitch}")
        counts = self.transform(X).mean(axis=0)
        self.scales_ = self.pitch * np.asarray(self.factors, dtype=float)
        self.counts_ = counts
        rep = box_dimension(self.scales_, counts)
        self.dimension_ = rep.dim_hat
        self.alpha_ = rep.alpha_hat
        self.stderr_ = rep.stderr
        self.r2_ = rep.r2
        return self


class CarpetCrossingEstimator(RegressorMixin, BaseEstimator):
    """Simulates ``P(A_eps)`` for a soup and fits its exponent.

    ``fit`` takes the eps values as a column; after fitting, ``table_`` holds
    the crossing table and ``predict`` evaluates the power-law fit.
    """

    def __init__(self, c: float = 0.2, shape="circle", replicas: int = 1000,
                 pitch_rule: float = 8.0, grid: str = "cartesian", n_theta: int = 128,
                 seed: int = 0, threads: int = 1):
        self.c = c
        self.shape = shape
        self.replicas = replicas
        self.pitch_rule = pitch_rule
        self.grid = grid
        self.n_theta = n_theta
        self.seed = seed
        self.threads = threads

    def fit(self, X, y=None):
        eps = _eps_column(X)
        shape = self.shape if isinstance(self.shape, ShapeMeasure) else ShapeMeasure.from_record(self.shape)
        self.table_ = estimate_p(self.c, shape, eps.tolist(), self.replicas, self.pitch_rule,
                                 self.seed, self.grid, None, self.n_theta, self.threads)
        X_tab = np.column_stack([self.table_.eps, self.table_.trials, self.table_.successes])
        self.fit_ = CrossingExponent().fit(X_tab)
        self.alpha_ = self.fit_.alpha_
        self.stderr_ = self.fit_.stderr_
        self.dimension_ = self.fit_.dimension_
        return self

    def predict(self, X):
        check_is_fitted(self, "fit_")
        return self.fit_.predict(X)
