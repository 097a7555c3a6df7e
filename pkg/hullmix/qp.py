"""
Exact solvers for the two small hull-weight problems.

The CATE weights minimize a two-variable least squares over the unit
square; the CDTE weight of each arm minimizes a one-variable quadratic
over the unit interval. Both are solved in closed form.
"""

import dataclasses
import itertools
import logging
import typing

import numpy as np


__all__ = [
    'MixCoefficients',
    'HullWeight',
    'QuadratureError',
    'solve_box_ls_2d',
    'solve_qp_1d',
]

log = logging.getLogger(__name__)


class QuadratureError(ValueError):
    """
    A squared-difference integral came out negative.
    """


@dataclasses.dataclass(frozen=True)
class MixCoefficients:
    """
    Convex-hull weights of the control (mu0) and treated (mu1) arms.

    >>> MixCoefficients(0.25, 1.5).feasible
    False
    """

    mu0: float
    mu1: float
    degenerate: bool = False

    @property
    def feasible(self):
        return 0.0 <= self.mu0 <= 1.0 and 0.0 <= self.mu1 <= 1.0

    def as_tuple(self):
        return self.mu0, self.mu1


class HullWeight(typing.NamedTuple):
    mu: float
    degenerate: bool = False


def _columns(a, b, g):
    a, b, g = (np.asarray(vec, dtype=float).ravel() for vec in (a, b, g))
    if not len(a) == len(b) == len(g):
        raise ValueError(f"length mismatch: {len(a)}, {len(b)}, {len(g)}")
    if not len(a):
        raise ValueError("at least one row is required")
    return a, b, g


def _normal_equations(a, b, g):
    # coefficients (mu0, mu1) on the design columns (-b, a)
    design = np.column_stack([-b, a])
    return design, design.T @ design, design.T @ g


def _edge_minimizers(G, r):
    """
    Minimizers along the four edges of the unit square: one coordinate
    pinned to a bound, the other at its clamped 1-d stationary point.
    """
    for free, pinned in ((0, 1), (1, 0)):
        for bound in (0.0, 1.0):
            point = np.empty(2)
            point[pinned] = bound
            curvature = G[free, free]
            slope = r[free] - G[free, pinned] * bound
            point[free] = np.clip(slope / curvature, 0, 1) if curvature > 0 else 0.0
            yield point


def _candidates(G, r):
    yield from map(np.array, itertools.product((0.0, 1.0), repeat=2))
    yield from _edge_minimizers(G, r)
    det = G[0, 0] * G[1, 1] - G[0, 1] ** 2
    if det > 1e-12 * max(np.trace(G) ** 2, 1e-300):
        interior = np.linalg.solve(G, r)
        if np.all((interior >= 0) & (interior <= 1)):
            yield interior


def solve_box_ls_2d(a, b, g, constrained=True):
    """
    Fit g ~ mu1 * a - mu0 * b by least squares.

    With ``constrained`` the weights are restricted to [0, 1]^2 and the
    minimizer is found by enumerating the active sets; ties resolve to
    the lexicographically smallest (mu0, mu1). Without it, the normal
    equations are solved (minimum norm when singular).

    >>> a = np.array([1.0, 0.0, 1.0])
    >>> b = np.array([0.0, 1.0, 1.0])
    >>> mix = solve_box_ls_2d(a, b, 0.7 * a - 0.3 * b)
    >>> round(mix.mu0, 9), round(mix.mu1, 9)
    (0.3, 0.7)
    >>> solve_box_ls_2d(a, b, np.zeros(3)).as_tuple()
    (0.0, 0.0)
    """
    a, b, g = _columns(a, b, g)
    design, G, r = _normal_equations(a, b, g)
    if not constrained:
        coef, _, rank, _ = np.linalg.lstsq(design, g, rcond=None)
        singular = bool(rank < 2)
        mix = MixCoefficients(float(coef[0]), float(coef[1]), degenerate=singular)
        if not mix.feasible:
            log.debug("unconstrained hull weights outside the box: %s", mix)
        return mix
    if not np.any(a) and not np.any(b):
        return MixCoefficients(0.0, 0.0, degenerate=True)

    def objective(point):
        return float(point @ G @ point - 2 * point @ r)

    scored = [
        (objective(point), tuple(map(float, point))) for point in _candidates(G, r)
    ]
    best = min(score for score, _ in scored)
    tolerance = 1e-12 * max(1.0, float(g @ g))
    mu0, mu1 = min(point for score, point in scored if score <= best + tolerance)
    return MixCoefficients(mu0, mu1)


def solve_qp_1d(H, d, constrained=True):
    """
    Minimize H * mu**2 / 2 - d * mu, over [0, 1] when ``constrained``.

    A flat objective (H near zero) returns 0.5 flagged as degenerate.

    >>> solve_qp_1d(2.0, 1.0)
    HullWeight(mu=0.5, degenerate=False)
    >>> solve_qp_1d(1.0, 5.0).mu, solve_qp_1d(1.0, -3.0).mu
    (1.0, 0.0)
    >>> solve_qp_1d(1.0, 5.0, constrained=False).mu
    5.0
    >>> solve_qp_1d(0.0, 1.0)
    HullWeight(mu=0.5, degenerate=True)
    """
    H = float(H)
    d = float(d)
    if H < -1e-9:
        raise QuadratureError(f"negative curvature {H}; check the quadrature")
    if H <= 1e-12:
        return HullWeight(0.5, degenerate=True)
    mu = d / H
    return HullWeight(float(np.clip(mu, 0.0, 1.0)) if constrained else mu)
