"""
Kernel ridge regression with the infinite-knot spline kernel.

Every conditional expectation and every conditional density in
:mod:`hullmix` is fit by the ridge solver in this module.
"""

import dataclasses
import logging

import numpy as np
import scipy.linalg


__all__ = [
    'DEFAULT_LAMBDAS',
    'DegenerateDataError',
    'FeatureScaler',
    'RegressionModel',
    'as_matrix',
    'spline_kernel',
    'gram',
    'solve_dual',
    'fit_ridge',
    'fit_ridge_multi',
    'predict',
]

log = logging.getLogger(__name__)

DEFAULT_LAMBDAS = tuple(10.0**exp for exp in range(-8, 0))
"""The penalty grid 1e-8, 1e-7, ..., 1e-1."""


class DegenerateDataError(ValueError):
    """
    No penalty in the grid produced a solvable Gram system.
    """


def as_matrix(X, p=None):
    """
    Coerce covariates to a float matrix of shape (n, p).

    A vector is read as n observations of a single covariate.

    >>> as_matrix([1, 2, 3]).shape
    (3, 1)
    >>> as_matrix([[1, 2]], p=3)
    Traceback (most recent call last):
    ...
    ValueError: expected 3 covariates, got 2
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise ValueError(f"covariates must be a matrix, got {X.ndim} dimensions")
    if p is not None and X.shape[1] != p:
        raise ValueError(f"expected {p} covariates, got {X.shape[1]}")
    return X


@dataclasses.dataclass(frozen=True)
class FeatureScaler:
    """
    Per-feature min/max map onto the unit cube.

    >>> scaler = FeatureScaler.from_data([[0.0, 5.0], [2.0, 5.0]])
    >>> scaler.transform([[1.0, 5.0], [4.0, 0.0]]).tolist()
    [[0.5, 0.5], [1.0, 0.5]]
    """

    low: np.ndarray
    high: np.ndarray

    def __post_init__(self):
        if np.any(self.high < self.low):
            raise ValueError("feature maximum below minimum")

    @classmethod
    def from_data(cls, X):
        X = as_matrix(X)
        return cls(low=X.min(axis=0), high=X.max(axis=0))

    @property
    def p(self):
        return len(self.low)

    def transform(self, X):
        """
        Scale into [0, 1]^p, clamping points outside the training range.
        Constant features map to 0.5.
        """
        X = as_matrix(X, self.p)
        span = self.high - self.low
        flat = span == 0
        scaled = (X - self.low) / np.where(flat, 1.0, span)
        scaled[:, flat] = 0.5
        return np.clip(scaled, 0.0, 1.0)


def _spline_1d(a, b):
    low = np.minimum(a, b)
    return 1 + a * b + a * b * low - (a + b) / 2 * low**2 + low**3 / 3


def spline_kernel(u, v):
    """
    First-order infinite-knot spline kernel, a product over dimensions.

    Inputs must already be scaled into the unit cube.

    >>> spline_kernel([0.0], [0.0])
    1.0
    >>> round(spline_kernel([1.0], [1.0]), 6)
    2.333333
    >>> round(spline_kernel([0.5, 0.5], [0.5, 0.5]), 6)
    1.668403
    >>> spline_kernel([0.2], [0.2, 0.3])
    Traceback (most recent call last):
    ...
    ValueError: dimension mismatch: 1 != 2
    >>> spline_kernel([1.5], [0.2])
    Traceback (most recent call last):
    ...
    ValueError: coordinates must lie in [0, 1]; scale inputs first
    """
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.size} != {v.size}")
    _check_unit(u)
    _check_unit(v)
    return float(np.prod(_spline_1d(u, v)))


def _check_unit(Z):
    if np.any(Z < 0) or np.any(Z > 1):
        raise ValueError("coordinates must lie in [0, 1]; scale inputs first")


def gram(A, B):
    """
    Spline kernel matrix between the rows of two scaled matrices.
    """
    A = as_matrix(A)
    B = as_matrix(B, A.shape[1])
    _check_unit(A)
    _check_unit(B)
    K = np.ones((len(A), len(B)))
    for j in range(A.shape[1]):
        K *= _spline_1d(A[:, j, None], B[None, :, j])
    return K


def _factor(K, penalty):
    n = len(K)
    system = K + penalty * np.eye(n)
    try:
        return scipy.linalg.cho_factor(system, lower=True)
    except np.linalg.LinAlgError:
        jitter = 1e-10 * np.trace(K) / n
        log.debug("Cholesky failed at penalty %g; jitter %g", penalty, jitter)
        return scipy.linalg.cho_factor(system + jitter * np.eye(n), lower=True)


def solve_dual(K, Y, penalty):
    """
    Solve (K + penalty * I) W = Y.

    Returns the dual weights and the diagonal of the inverse system
    matrix, from which leave-one-out residuals follow as
    ``W / diag[:, None]``.
    """
    factor = _factor(K, penalty)
    weights = scipy.linalg.cho_solve(factor, Y)
    inverse = scipy.linalg.cho_solve(factor, np.eye(len(K)))
    return weights, np.diag(inverse)


@dataclasses.dataclass(frozen=True)
class RegressionModel:
    """
    A fitted kernel ridge regressor.

    ``weights`` has one column per target when several targets share
    the Gram matrix; single-target models carry a vector.
    """

    scaler: FeatureScaler
    inputs: np.ndarray
    weights: np.ndarray
    lam: float
    loo_error: float = float('nan')

    @property
    def p(self):
        return self.scaler.p

    def predict(self, X):
        X = as_matrix(X, self.p)
        if not len(X):
            return np.zeros((0,) + self.weights.shape[1:])
        return gram(self.scaler.transform(X), self.inputs) @ self.weights


def _select(X, Y, lambda_grid):
    X = as_matrix(X)
    n = len(X)
    if n < 2:
        raise ValueError(f"ridge regression needs at least 2 rows, got {n}")
    grid = tuple(lambda_grid)
    if not grid or min(grid) <= 0:
        raise ValueError(f"penalty grid must be non-empty and positive: {grid}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise ValueError("covariates and targets must be finite")
    scaler = FeatureScaler.from_data(X)
    inputs = scaler.transform(X)
    K = gram(inputs, inputs)
    best = None
    for lam in grid:
        try:
            weights, diag = solve_dual(K, Y, lam * n)
        except np.linalg.LinAlgError:
            log.debug("Gram system unsolvable at lambda=%g", lam)
            continue
        residuals = weights / (diag if weights.ndim == 1 else diag[:, None])
        error = float(np.mean(residuals**2))
        if not np.isfinite(error):
            continue
        if best is None or error < best[0]:
            best = error, lam, weights
    if best is None:
        raise DegenerateDataError(f"no penalty in {grid} gives a solvable system")
    error, lam, weights = best
    log.debug("selected lambda=%g (LOO error %.6g, n=%d)", lam, error, n)
    return RegressionModel(scaler, inputs, weights, lam, error)


def fit_ridge(X, y, lambda_grid=DEFAULT_LAMBDAS):
    """
    Fit y on X, choosing the penalty by closed-form leave-one-out error.

    The system solved is (K + lambda * n * I) w = y.

    >>> model = fit_ridge([[0.0], [1.0]], [0.0, 0.0])
    >>> predict(model, [[0.3], [2.0]]).tolist()
    [0.0, 0.0]
    """
    y = np.asarray(y, dtype=float).ravel()
    if len(y) != len(as_matrix(X)):
        raise ValueError(f"{len(as_matrix(X))} rows but {len(y)} outcomes")
    return _select(X, y, lambda_grid)


def fit_ridge_multi(X, Y, lambda_grid=DEFAULT_LAMBDAS):
    """
    Fit several targets (the columns of Y) on one shared Gram matrix,
    selecting a single penalty by the pooled leave-one-out error.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2 or len(Y) != len(as_matrix(X)):
        raise ValueError("targets must be a matrix with one row per observation")
    return _select(X, Y, lambda_grid)


def predict(model, X):
    """
    Evaluate a fitted model at new covariates.

    >>> predict(fit_ridge([[0.0], [1.0]], [1.0, 2.0]), np.zeros((0, 1))).shape
    (0,)
    """
    return model.predict(X)
