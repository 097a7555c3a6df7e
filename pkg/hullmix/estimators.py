"""
CATE and CDTE estimators that combine an observational dataset with an
exclusive randomized trial.

The hull estimators express the trial's treatment response per arm as a
convex combination of the observational response before and after
treatment assignment, learn the mixing weights on the trial support, and
extrapolate with the observational components everywhere else.
"""

import dataclasses
import functools
import logging

import numpy as np
from more_itertools import first

from .density import (
    CONTINUOUS,
    ConditionalDensityModel,
    OutcomeGrid,
    fit_conditional_density,
    integrate,
    value_at,
)
from .kernel import DEFAULT_LAMBDAS, as_matrix, fit_ridge
from .qp import MixCoefficients, QuadratureError, solve_box_ls_2d, solve_qp_1d


__all__ = [
    'CATE_ESTIMATORS',
    'CDTE_ESTIMATORS',
    'TWO_STEP_TIME',
    'ONE_STEP_TIME',
    'Components',
    'DensityComponents',
    'CateModel',
    'CdteModel',
    'estimate_e0',
    'psi',
    'fit_mix',
    'fit_och_cate',
    'predict_cate',
    'fit_baseline',
    'fit_cate',
    'hull_weight',
    'fit_och_cdte',
    'fit_density_baseline',
    'fit_cdte',
    'predict_cdte',
    'ols',
]

log = logging.getLogger(__name__)

OCH2 = 'och2'
OCH1 = 'och1'
UNC2 = 'unc2'
UNC1 = 'unc1'
SDD = 'sdd'
TWO_STEP = '2step'
OBS_ONLY = 'obs-only'
RCT_ONLY = 'rct-only'
OLT = 'olt'
CDD = 'cdd'
OCHD = 'ochd'
UNCD = 'uncd'

CATE_ESTIMATORS = OCH2, OCH1, UNC2, UNC1, SDD, TWO_STEP, OBS_ONLY, RCT_ONLY, OLT, CDD
"""CATE roster in the order of the accuracy tables."""

CDTE_ESTIMATORS = OCHD, UNCD, OBS_ONLY, RCT_ONLY
"""CDTE roster in the order of the accuracy tables."""

BASELINES = RCT_ONLY, OBS_ONLY, OLT, TWO_STEP, SDD, CDD

TWO_STEP_TIME = 'two-step-time'
ONE_STEP_TIME = 'one-step-time'

HULL_VARIANTS = {
    OCH2: (TWO_STEP_TIME, True),
    OCH1: (ONE_STEP_TIME, True),
    UNC2: (TWO_STEP_TIME, False),
    UNC1: (ONE_STEP_TIME, False),
}


def estimate_e0(obs, lambda_grid=DEFAULT_LAMBDAS):
    """
    Regress the pre-assignment outcome on the covariates over both
    treatments pooled. Pooling weights each arm by its conditional
    prevalence, so the fit targets the baseline expectation of the
    whole population.
    """
    return fit_ridge(*obs.step(0), lambda_grid)


class Components:
    """
    Nuisance regressions for one observational/trial pair, fitted on
    first use and shared by every estimator built from them.
    """

    def __init__(self, obs, rct, lambda_grid=DEFAULT_LAMBDAS):
        if obs.p != rct.p:
            raise ValueError(f"covariate counts differ: {obs.p} != {rct.p}")
        self.obs = obs
        self.rct = rct
        self.lambda_grid = tuple(lambda_grid)

    def _fit(self, rows):
        return fit_ridge(*rows, self.lambda_grid)

    @functools.cached_property
    def e11(self):
        return self._fit(self.obs.cell(1, 1))

    @functools.cached_property
    def e10(self):
        return self._fit(self.obs.cell(1, 0))

    @functools.cached_property
    def e01(self):
        return self._fit(self.obs.cell(0, 1))

    @functools.cached_property
    def e00(self):
        return self._fit(self.obs.cell(0, 0))

    @functools.cached_property
    def e0(self):
        return estimate_e0(self.obs, self.lambda_grid)

    @functools.cached_property
    def trial_arms(self):
        """
        Regressions of the trial outcome per arm, control first.
        """
        return self._fit(self.rct.arm(0)), self._fit(self.rct.arm(1))

    def g(self, X):
        control, treated = self.trial_arms
        return treated.predict(X) - control.predict(X)

    @functools.cached_property
    def g_trial(self):
        """
        Trial-fitted CATE at the trial covariates.
        """
        return self.g(self.rct.X)


def psi(mu, e11, e10, e0):
    """
    The hull-parameterized CATE surrogate.

    >>> psi(MixCoefficients(1.0, 1.0), 2.0, 1.0, 0.5)
    1.0
    >>> psi(MixCoefficients(0.0, 0.0), 2.0, 1.0, 0.5)
    0.0
    >>> psi(MixCoefficients(0.0, 1.0), 2.0, 1.0, 0.5)
    1.5
    """
    return mu.mu1 * (e11 - e0) - mu.mu0 * (e10 - e0)


def fit_mix(g, e11, e10, e0, constrained=True):
    """
    Hull weights that best reproduce the trial CATE ``g`` from the
    observational components, all evaluated at the trial covariates.
    """
    e0 = np.broadcast_to(np.asarray(e0, dtype=float), np.shape(e11))
    return solve_box_ls_2d(e11 - e0, e10 - e0, g, constrained)


@dataclasses.dataclass(frozen=True, eq=False)
class CateModel:
    """
    A fitted CATE estimator: its component regressions plus either hull
    weights (hull kinds) or linear coefficients (baselines).
    """

    kind: str
    components: dict
    mix: MixCoefficients | None = None
    coef: np.ndarray | None = None
    degenerate: bool = False

    @property
    def p(self):
        return first(self.components.values()).p


def fit_och_cate(
    obs,
    rct,
    variant=TWO_STEP_TIME,
    constrained=True,
    lambda_grid=DEFAULT_LAMBDAS,
    *,
    components=None,
):
    """
    Fit a hull CATE estimator: OCH with ``constrained``, its UNC
    ablation without; two time steps use the pooled pre-assignment
    regression as hull endpoint, one time step uses zero.
    """
    if variant not in (TWO_STEP_TIME, ONE_STEP_TIME):
        raise ValueError(f"unknown variant {variant!r}")
    components = components or Components(obs, rct, lambda_grid)
    g = components.g_trial
    X = components.rct.X
    fitted = {'e11': components.e11, 'e10': components.e10}
    if variant == TWO_STEP_TIME:
        fitted['e0'] = components.e0
    e0 = fitted['e0'].predict(X) if 'e0' in fitted else np.zeros(len(X))
    e11 = fitted['e11'].predict(X)
    e10 = fitted['e10'].predict(X)
    mix = fit_mix(g, e11, e10, e0, constrained)
    kind = {value: key for key, value in HULL_VARIANTS.items()}[variant, constrained]
    log.debug("%s hull weights mu0=%.4f mu1=%.4f", kind, mix.mu0, mix.mu1)
    return CateModel(kind, fitted, mix=mix, degenerate=mix.degenerate)


def ols(design, target):
    """
    Least squares coefficients, minimum norm when the design is singular.

    >>> design = np.column_stack([np.arange(3.0), np.ones(3)])
    >>> coef, singular = ols(design, [1, 3, 5])
    >>> np.round(coef, 9).tolist(), singular
    ([2.0, 1.0], False)
    """
    design = np.asarray(design, dtype=float)
    coef, _, rank, _ = np.linalg.lstsq(design, np.asarray(target, float), rcond=None)
    return coef, bool(rank < design.shape[1])


def ridge_ols(design, target, lambda_grid=DEFAULT_LAMBDAS):
    """
    Linear ridge with the penalty chosen by closed-form leave-one-out error.
    The flag reports a rank-deficient design, as for :func:`ols`.
    """
    design = np.asarray(design, dtype=float)
    target = np.asarray(target, dtype=float)
    rows, width = design.shape
    best = None
    for lam in lambda_grid:
        system = design.T @ design + lam * rows * np.eye(width)
        coef = np.linalg.solve(system, design.T @ target)
        leverage = np.einsum('ij,ji->i', design, np.linalg.solve(system, design.T))
        error = float(np.mean(((target - design @ coef) / (1 - leverage)) ** 2))
        if best is None or error < best[0]:
            best = error, coef
    return best[1], bool(np.linalg.matrix_rank(design) < width)


def _obs_contrast(components, X):
    return components.e11.predict(X) - components.e10.predict(X)


def fit_baseline(
    kind,
    obs,
    rct,
    lambda_grid=DEFAULT_LAMBDAS,
    *,
    components=None,
    sdd_ridge=False,
):
    """
    Fit one of the comparison CATE estimators.

    Trial-side coefficients are fit against the same ridge-fitted trial
    CATE the hull estimators use.
    """
    if kind not in BASELINES:
        raise ValueError(f"unknown baseline {kind!r}")
    components = components or Components(obs, rct, lambda_grid)
    X = components.rct.X
    if kind == RCT_ONLY:
        control, treated = components.trial_arms
        return CateModel(kind, {'g0': control, 'g1': treated})
    if kind == OBS_ONLY:
        return CateModel(kind, {'e11': components.e11, 'e10': components.e10})
    if kind == CDD:
        fitted = {
            name: getattr(components, name) for name in ('e11', 'e10', 'e01', 'e00')
        }
        return CateModel(kind, fitted)
    g = components.g_trial
    fitted = {'e11': components.e11, 'e10': components.e10}
    if kind == OLT:
        f = _obs_contrast(components, X)
        coef, singular = ols(np.column_stack([f, np.ones(len(X))]), g)
    elif kind == TWO_STEP:
        residual = g - _obs_contrast(components, X)
        coef, singular = ols(np.column_stack([X, np.ones(len(X))]), residual)
    else:
        fitted.update(e01=components.e01, e00=components.e00)
        design = np.column_stack(
            [
                -fitted['e01'].predict(X),
                -fitted['e10'].predict(X),
                fitted['e00'].predict(X),
            ]
        )
        target = g - fitted['e11'].predict(X)
        solve = functools.partial(ridge_ols, lambda_grid=components.lambda_grid)
        coef, singular = (solve if sdd_ridge else ols)(design, target)
    if singular:
        log.info("%s design is singular; using the minimum-norm fit", kind)
    return CateModel(kind, fitted, coef=coef, degenerate=singular)


def fit_cate(kind, components, *, sdd_ridge=False):
    """
    Fit any CATE estimator of the roster on shared components.
    """
    if kind in HULL_VARIANTS:
        variant, constrained = HULL_VARIANTS[kind]
        return fit_och_cate(
            components.obs,
            components.rct,
            variant,
            constrained,
            components=components,
        )
    return fit_baseline(
        kind, components.obs, components.rct, components=components, sdd_ridge=sdd_ridge
    )


def _hull_formula(model, e, X):
    return psi(model.mix, e['e11'], e['e10'], e.get('e0', 0.0))


def _olt_formula(model, e, X):
    alpha, beta = model.coef
    return alpha * (e['e11'] - e['e10']) + beta


def _two_step_formula(model, e, X):
    return e['e11'] - e['e10'] + X @ model.coef[:-1] + model.coef[-1]


def _sdd_formula(model, e, X):
    a1, a2, a3 = model.coef
    return e['e11'] - a1 * e['e01'] - a2 * e['e10'] + a3 * e['e00']


FORMULAS = {
    **dict.fromkeys(HULL_VARIANTS, _hull_formula),
    RCT_ONLY: lambda model, e, X: e['g1'] - e['g0'],
    OBS_ONLY: lambda model, e, X: e['e11'] - e['e10'],
    OLT: _olt_formula,
    TWO_STEP: _two_step_formula,
    SDD: _sdd_formula,
    CDD: lambda model, e, X: (e['e11'] - e['e01']) - (e['e10'] - e['e00']),
}


def predict_cate(model, X):
    """
    Evaluate a fitted CATE estimator at new covariates.
    """
    X = as_matrix(X, model.p)
    if not len(X):
        return np.zeros(0)
    evaluated = {name: comp.predict(X) for name, comp in model.components.items()}
    return np.asarray(FORMULAS[model.kind](model, evaluated, X), dtype=float)


class DensityComponents:
    """
    Conditional density fits for one observational/trial pair, fitted on
    first use on a common outcome grid.
    """

    def __init__(self, obs, rct, grid, mode=CONTINUOUS, lambda_grid=DEFAULT_LAMBDAS):
        if obs.p != rct.p:
            raise ValueError(f"covariate counts differ: {obs.p} != {rct.p}")
        self.obs = obs
        self.rct = rct
        self.grid = grid
        self.mode = mode
        self.lambda_grid = tuple(lambda_grid)

    def _fit(self, rows):
        return fit_conditional_density(
            *rows, self.grid, self.mode, lambda_grid=self.lambda_grid
        )

    @functools.cached_property
    def pre(self):
        """
        Density of the pre-assignment outcome, both treatments pooled.
        """
        return self._fit(self.obs.step(0))

    @functools.cached_property
    def post(self):
        """
        Densities of the post-assignment outcome per observational arm.
        """
        return self._fit(self.obs.cell(1, 0)), self._fit(self.obs.cell(1, 1))

    @functools.cached_property
    def trial(self):
        """
        Densities of the trial outcome per arm.
        """
        return self._fit(self.rct.arm(0)), self._fit(self.rct.arm(1))


@dataclasses.dataclass(frozen=True, eq=False)
class CdteModel:
    """
    Per-arm densities mu_t * post_t + (1 - mu_t) * pre.

    Baselines carry no ``pre`` component and mu_t = 1.
    """

    kind: str
    grid: OutcomeGrid
    post: tuple[ConditionalDensityModel, ConditionalDensityModel]
    pre: ConditionalDensityModel | None = None
    mu: tuple[float, float] = (1.0, 1.0)
    degenerate: tuple[bool, bool] = (False, False)

    @property
    def p(self):
        return self.post[0].p


def hull_weight(post, pre, post_at_y, pre_at_y, grid, constrained=True):
    """
    Mixing weight of one arm from evaluated densities.

    ``post`` and ``pre`` hold the densities at every trial row (both
    arms); ``post_at_y`` and ``pre_at_y`` their values at the observed
    outcomes of the arm's own trial rows.
    """
    post = np.atleast_2d(post)
    pre = np.atleast_2d(pre)
    H = float(np.mean(integrate((post - pre) ** 2, grid)))
    if H < -1e-9:
        raise QuadratureError(f"squared-difference integral is negative: {H}")
    cross = float(np.mean(integrate(post * pre - pre**2, grid)))
    d = float(np.mean(np.asarray(post_at_y) - np.asarray(pre_at_y))) - cross
    return solve_qp_1d(max(H, 0.0), d, constrained)


def fit_och_cdte(
    obs,
    rct,
    grid,
    constrained=True,
    mode=CONTINUOUS,
    lambda_grid=DEFAULT_LAMBDAS,
    *,
    components=None,
):
    """
    Fit the hull CDTE estimator (OCH_d), or its unconstrained ablation.
    """
    for t in (0, 1):
        rct.arm(t)
    components = components or DensityComponents(obs, rct, grid, mode, lambda_grid)
    X = components.rct.X
    pre = components.pre.evaluate(X)
    grid = components.pre.grid
    weights = []
    for t, model in enumerate(components.post):
        post = model.evaluate(X)
        arm = components.rct.t == t
        y = components.rct.y[arm]
        weight = hull_weight(
            post,
            pre,
            value_at(post[arm], y, grid),
            value_at(pre[arm], y, grid),
            grid,
            constrained,
        )
        if weight.degenerate:
            log.info("arm t=%d: hull endpoints coincide; mu set to %s", t, weight.mu)
        weights.append(weight)
    kind = OCHD if constrained else UNCD
    log.debug("%s hull weights %s", kind, [weight.mu for weight in weights])
    return CdteModel(
        kind,
        grid,
        post=components.post,
        pre=components.pre,
        mu=tuple(weight.mu for weight in weights),
        degenerate=tuple(weight.degenerate for weight in weights),
    )


def fit_density_baseline(
    kind,
    obs,
    rct,
    grid,
    mode=CONTINUOUS,
    lambda_grid=DEFAULT_LAMBDAS,
    *,
    components=None,
):
    """
    Density comparators: per-arm trial densities (rct-only) or per-arm
    post-assignment observational densities (obs-only).
    """
    components = components or DensityComponents(obs, rct, grid, mode, lambda_grid)
    if kind == RCT_ONLY:
        post = components.trial
    elif kind == OBS_ONLY:
        post = components.post
    else:
        raise ValueError(f"unknown density baseline {kind!r}")
    return CdteModel(kind, post[0].grid, post=post)


def fit_cdte(kind, components):
    """
    Fit any CDTE estimator of the roster on shared components.
    """
    if kind in (OCHD, UNCD):
        return fit_och_cdte(
            components.obs,
            components.rct,
            components.grid,
            constrained=kind == OCHD,
            components=components,
        )
    return fit_density_baseline(
        kind, components.obs, components.rct, components.grid, components=components
    )


def predict_cdte(model, X):
    """
    Per-arm densities at new covariates, shape (2, m, G) with the
    control arm first.
    """
    X = as_matrix(X, model.p)
    pre = model.pre.evaluate(X) if model.pre is not None else 0.0
    arms = []
    for mu, post in zip(model.mu, model.post):
        mixed = mu * post.evaluate(X) + (1 - mu) * pre
        mass = integrate(mixed, model.grid)
        off = np.abs(mass - 1) > 1e-6
        if np.any(off):
            mixed[off] /= mass[off, None]
        arms.append(mixed)
    return np.stack(arms)

