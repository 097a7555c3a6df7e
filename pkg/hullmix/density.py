"""
Conditional density estimation on a fixed outcome grid.

Densities are fit by regressing smoothed (continuous outcomes) or
indicator (discrete outcomes) targets on the covariates with the
spline-kernel ridge solver, then clipped and renormalized.
"""

import dataclasses
import logging

import numpy as np
import scipy.integrate
import scipy.stats

from .kernel import DEFAULT_LAMBDAS, RegressionModel, as_matrix, fit_ridge_multi


__all__ = [
    'CONTINUOUS',
    'DISCRETE',
    'OutcomeGrid',
    'ConditionalDensityModel',
    'silverman_bandwidth',
    'fit_conditional_density',
    'eval_density',
    'inner_product',
    'integrate',
    'value_at',
]

log = logging.getLogger(__name__)

CONTINUOUS = 'continuous'
DISCRETE = 'discrete'
MODES = CONTINUOUS, DISCRETE


@dataclasses.dataclass(frozen=True, eq=False)
class OutcomeGrid:
    """
    Outcome values over which densities are held. A continuous grid is
    uniformly spaced.

    A discrete grid lists the outcome classes, at any spacing; integrals
    over it are sums.

    >>> grid = OutcomeGrid.uniform(0.0, 1.0, 5)
    >>> grid.points.tolist()
    [0.0, 0.25, 0.5, 0.75, 1.0]
    >>> grid.step
    0.25
    >>> OutcomeGrid(np.array([0.0, 1.0, 3.0]))
    Traceback (most recent call last):
    ...
    ValueError: grid spacing must be uniform
    >>> OutcomeGrid(np.array([0.0, 1.0, 3.0]), discrete=True).mode
    'discrete'
    """

    points: np.ndarray
    discrete: bool = False

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        object.__setattr__(self, 'points', points)
        if points.ndim != 1 or len(points) < 2:
            raise ValueError("grid needs at least 2 points")
        gaps = np.diff(points)
        if np.any(gaps <= 0):
            raise ValueError("grid points must be strictly increasing")
        if self.discrete:
            return
        if np.ptp(gaps) > 1e-12 * max(abs(gaps.mean()), np.abs(points).max()):
            raise ValueError("grid spacing must be uniform")

    @classmethod
    def uniform(cls, low, high, size=201):
        return cls(np.linspace(low, high, size))

    @classmethod
    def covering(cls, y, bandwidth, size=201):
        """
        Grid over [min(y) - 3h, max(y) + 3h].
        """
        y = np.asarray(y, dtype=float)
        return cls.uniform(y.min() - 3 * bandwidth, y.max() + 3 * bandwidth, size)

    @classmethod
    def classes(cls, y):
        """
        Discrete grid of the distinct outcome values.
        """
        return cls(np.unique(np.asarray(y, dtype=float)), discrete=True)

    def __len__(self):
        return len(self.points)

    @property
    def step(self):
        return float(self.points[1] - self.points[0])

    @property
    def mode(self):
        return DISCRETE if self.discrete else CONTINUOUS


def integrate(values, grid):
    """
    Integrate over the grid along the last axis: trapezoid rule for a
    continuous grid, a plain sum for a discrete one.

    >>> round(float(integrate(np.ones(101), OutcomeGrid.uniform(0.0, 1.0, 101))), 12)
    1.0
    """
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != len(grid):
        raise ValueError(f"expected {len(grid)} grid values, got {values.shape[-1]}")
    if grid.discrete:
        return values.sum(axis=-1)
    return scipy.integrate.trapezoid(values, grid.points, axis=-1)


def inner_product(a, b, grid):
    """
    Approximate the integral of a(y) * b(y) over the grid.

    >>> grid = OutcomeGrid.uniform(0.0, 1.0, 101)
    >>> round(float(inner_product(np.ones(101), np.ones(101), grid)), 9)
    1.0
    >>> inner_product(np.ones(3), np.ones(4), grid)
    Traceback (most recent call last):
    ...
    ValueError: length mismatch: 3 != 4
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"length mismatch: {a.shape[-1]} != {b.shape[-1]}")
    return integrate(a * b, grid)


def value_at(densities, y, grid):
    """
    Density value of each row at its own outcome, by linear interpolation
    between the neighbouring grid points.
    """
    densities = np.atleast_2d(densities)
    y = np.asarray(y, dtype=float).ravel()
    return np.array(
        [np.interp(target, grid.points, row) for target, row in zip(y, densities)]
    )


def normalize(raw, grid):
    """
    Clip at zero and rescale every row to unit mass. Rows with no
    positive mass fall back to the uniform density over the grid.
    """
    clipped = np.clip(np.atleast_2d(raw), 0.0, None)
    mass = integrate(clipped, grid)
    flat = mass <= 0
    if np.any(flat):
        log.debug("%d density rows clipped to zero; using uniform", flat.sum())
        clipped[flat] = 1.0
        mass = np.where(flat, integrate(clipped, grid), mass)
    return clipped / mass[:, None]


def silverman_bandwidth(y):
    """
    Rule-of-thumb bandwidth 1.06 * sd * n ** (-1/5).

    >>> silverman_bandwidth(np.zeros(5))
    0.0
    """
    y = np.asarray(y, dtype=float)
    return float(1.06 * y.std(ddof=1) * len(y) ** -0.2)


@dataclasses.dataclass(frozen=True, eq=False)
class ConditionalDensityModel:
    """
    Conditional density p(y | x) held as one ridge target per grid point.
    """

    regression: RegressionModel
    grid: OutcomeGrid
    bandwidth: float = float('nan')

    @property
    def mode(self):
        return self.grid.mode

    @property
    def p(self):
        return self.regression.p

    def evaluate(self, X):
        """
        Densities at every row of X, shape (m, G).
        """
        X = as_matrix(X, self.p)
        if not len(X):
            return np.zeros((0, len(self.grid)))
        return normalize(self.regression.predict(X), self.grid)


def _targets(y, grid, bandwidth):
    if grid.discrete:
        hits = np.isclose(y[:, None], grid.points[None, :], rtol=0, atol=1e-9)
        missing = ~hits.any(axis=1)
        if np.any(missing):
            raise ValueError(f"outcome {y[missing][0]!r} is not a grid class")
        return hits.astype(float)
    return scipy.stats.norm.pdf(grid.points[None, :], loc=y[:, None], scale=bandwidth)


def fit_conditional_density(
    X, y, grid, mode=CONTINUOUS, bandwidth=None, lambda_grid=DEFAULT_LAMBDAS
):
    """
    Fit p(y | x) on ``grid``.

    In continuous mode each grid point's target is a Gaussian smoothing
    kernel centered on the observed outcomes, with Silverman's bandwidth
    unless one is given. In discrete mode the targets are class
    indicators and every outcome must be one of the grid points.
    """
    if mode not in MODES:
        raise ValueError(f"unknown density mode {mode!r}")
    if (mode == DISCRETE) != grid.discrete:
        grid = dataclasses.replace(grid, discrete=mode == DISCRETE)
    X = as_matrix(X)
    y = np.asarray(y, dtype=float).ravel()
    if len(y) != len(X):
        raise ValueError(f"{len(X)} rows but {len(y)} outcomes")
    if len(y) < 2:
        raise ValueError(f"density estimation needs at least 2 rows, got {len(y)}")
    if mode == CONTINUOUS and bandwidth is None:
        bandwidth = silverman_bandwidth(y)
        if not bandwidth > 0:
            bandwidth = grid.step
    targets = _targets(y, grid, bandwidth)
    regression = fit_ridge_multi(X, targets, lambda_grid)
    log.debug("density fit: mode=%s, h=%s, lambda=%g", mode, bandwidth, regression.lam)
    return ConditionalDensityModel(
        regression, grid, float('nan') if bandwidth is None else float(bandwidth)
    )


def eval_density(model, x):
    """
    Clipped, normalized density values on the grid at a single point.
    """
    x = np.asarray(x, dtype=float).ravel()
    if x.size != model.p:
        raise ValueError(f"expected {model.p} covariates, got {x.size}")
    return model.evaluate(x.reshape(1, -1))[0]
