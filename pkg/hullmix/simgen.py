"""
Synthetic observational/trial pairs with analytic ground truth.

Covariates are uniform on [-1, 1]^p and outcomes depend on them through
Z = x1 + ... + xp. Each (m, t) cell of the observational data follows
its own response function; the trial recruits only X1 >= -1 + 0.02 r
and draws its outcomes from a mixture of the observational responses.
"""

import dataclasses
import logging
import typing

import numpy as np
import scipy.stats

from .data import ObservationalDataset, TrialDataset
from .density import OutcomeGrid
from .kernel import as_matrix


__all__ = [
    'FUNCTIONS',
    'HOLDS',
    'VIOLATED',
    'SimConfig',
    'Scenario',
    'Simulation',
    'gen_scenario',
    'gen_observational',
    'gen_trial',
    'gen_test_points',
    'true_cate',
    'true_cdte',
    'simulation_grid',
    'simulate',
]

log = logging.getLogger(__name__)


def _ramp(z):
    return z * scipy.stats.norm.cdf(z)


def _bump(z):
    return np.exp(-(z**2))


FUNCTIONS = {
    'identity': lambda z: z,
    'ramp': _ramp,
    'bump': _bump,
    'tanh': np.tanh,
}
"""Response functions of Z a scenario draws from."""

HOLDS = 'holds'
VIOLATED = 'violated'
REGIMES = HOLDS, VIOLATED

VARIANCE = 'variance'
SD = 'sd'

CELLS = (0, 0), (0, 1), (1, 0), (1, 1)


@dataclasses.dataclass(frozen=True)
class SimConfig:
    """
    Size and shape of one synthetic dataset pair.

    ``noise`` is the outcome noise variance, or its standard deviation
    when ``noise_reading`` is ``'sd'``.

    >>> SimConfig(p=2).sd
    0.31622776601683794
    >>> SimConfig(n_obs=10)
    Traceback (most recent call last):
    ...
    ValueError: n_obs must be a positive multiple of 4, got 10
    """

    p: int = 2
    n_obs: int = 1000
    n_rct: int = 100
    exclusion_rate: float = 0.0
    regime: str = HOLDS
    noise: float = 0.1
    noise_reading: str = VARIANCE
    seed: int = 0

    def __post_init__(self):
        if self.p < 1:
            raise ValueError(f"p must be at least 1, got {self.p}")
        if self.n_obs < 4 or self.n_obs % 4:
            raise ValueError(
                f"n_obs must be a positive multiple of 4, got {self.n_obs}"
            )
        if self.n_rct < 2 or self.n_rct % 2:
            raise ValueError(f"n_rct must be a positive even number, got {self.n_rct}")
        if not 0 <= self.exclusion_rate < 100:
            raise ValueError(
                f"exclusion_rate must lie in [0, 100), got {self.exclusion_rate}"
            )
        if self.regime not in REGIMES:
            raise ValueError(f"regime must be one of {REGIMES}, got {self.regime!r}")
        if not self.noise > 0:
            raise ValueError(f"noise must be positive, got {self.noise}")
        if self.noise_reading not in (VARIANCE, SD):
            raise ValueError("noise_reading must be 'variance' or 'sd'")

    @property
    def sd(self):
        if self.noise_reading == SD:
            return self.noise
        return float(np.sqrt(self.noise))

    @property
    def recruitment_floor(self):
        """
        Lower bound of X1 among trial recruits.
        """
        return -1 + 0.02 * self.exclusion_rate


@dataclasses.dataclass(frozen=True)
class Scenario:
    """
    One draw of the generative model: a response function per (m, t)
    cell (ordered (0, 0), (0, 1), (1, 0), (1, 1)) and the arm mixing
    weights.
    """

    functions: tuple[str, str, str, str]
    mu0: float
    mu1: float
    regime: str = HOLDS
    sd: float = float(np.sqrt(0.1))

    def __post_init__(self):
        object.__setattr__(self, 'functions', tuple(self.functions))
        unknown = set(self.functions) - set(FUNCTIONS)
        if len(self.functions) != 4 or unknown:
            raise ValueError(f"need 4 known function ids, got {self.functions}")
        if not (0 <= self.mu0 <= 1 and 0 <= self.mu1 <= 1):
            raise ValueError(f"mixing weights outside [0, 1]: {self.mu0}, {self.mu1}")

    def f(self, m, t, z):
        return FUNCTIONS[self.functions[CELLS.index((m, t))]](np.asarray(z, float))

    def mu(self, t):
        return self.mu1 if t else self.mu0

    def as_dict(self):
        return dataclasses.asdict(self) | {'functions': list(self.functions)}

    @classmethod
    def from_mapping(cls, mapping):
        return cls(**mapping)


def gen_scenario(cfg, rng):
    ids = list(FUNCTIONS)
    functions = tuple(ids[index] for index in rng.integers(len(ids), size=4))
    mu0, mu1 = rng.uniform(size=2)
    return Scenario(functions, float(mu0), float(mu1), cfg.regime, cfg.sd)


def _z(X):
    return as_matrix(X).sum(axis=1)


def _components(scenario, t, z):
    """
    Mixture weights and component means of the trial outcome of arm t.
    """
    mu = scenario.mu(t)
    post = scenario.f(1, t, z)
    pre_treated = scenario.f(0, 1, z)
    pre_control = scenario.f(0, 0, z)
    if scenario.regime == HOLDS:
        return (
            (mu, post),
            ((1 - mu) / 2, pre_treated),
            ((1 - mu) / 2, pre_control),
        )
    # outside the hull: push the post-assignment response away from baseline
    delta = post - (pre_treated + pre_control) / 2
    return (
        (mu / 2, post + delta),
        ((1 - mu) / 2, post),
        (mu / 4, pre_treated),
        (mu / 4, pre_control),
        ((1 - mu) / 4, pre_treated - delta),
        ((1 - mu) / 4, pre_control - delta),
    )


def _uniform(rng, size, p):
    return rng.uniform(-1.0, 1.0, size=(size, p))


def gen_observational(cfg, scenario, rng):
    """
    n_obs / 4 rows per (m, t) cell, outcomes Normal(f_mt(Z), noise).
    """
    size = cfg.n_obs // 4
    X, t, m, y = [], [], [], []
    for step, arm in CELLS:
        covariates = _uniform(rng, size, cfg.p)
        mean = scenario.f(step, arm, _z(covariates))
        X.append(covariates)
        t.append(np.full(size, arm))
        m.append(np.full(size, step))
        y.append(mean + cfg.sd * rng.standard_normal(size))
    return ObservationalDataset(
        X=np.concatenate(X),
        t=np.concatenate(t),
        m=np.concatenate(m),
        y=np.concatenate(y),
    )


def gen_trial(cfg, scenario, rng):
    """
    n_rct / 2 rows per arm with X1 restricted by the exclusion rate.
    """
    size = cfg.n_rct // 2
    X, t, y = [], [], []
    for arm in (0, 1):
        covariates = _uniform(rng, size, cfg.p)
        covariates[:, 0] = rng.uniform(cfg.recruitment_floor, 1.0, size=size)
        weights, means = zip(*_components(scenario, arm, _z(covariates)))
        probabilities = np.asarray(weights) / sum(weights)
        chosen = rng.choice(len(weights), size=size, p=probabilities)
        mean = np.stack(means)[chosen, np.arange(size)]
        X.append(covariates)
        t.append(np.full(size, arm))
        y.append(mean + cfg.sd * rng.standard_normal(size))
    return TrialDataset(X=np.concatenate(X), t=np.concatenate(t), y=np.concatenate(y))


def gen_test_points(cfg, rng, size=1000):
    """
    Fresh evaluation covariates over the whole observational support.
    """
    return _uniform(rng, size, cfg.p)


def arm_mean(scenario, t, X):
    return sum(weight * mean for weight, mean in _components(scenario, t, _z(X)))


def true_cate(scenario, X):
    """
    E(Y(1) | x) - E(Y(0) | x) under the trial's generative model, at
    every row of X.

    >>> scenario = Scenario(('identity', 'identity', 'tanh', 'bump'), 0.0, 0.0)
    >>> true_cate(scenario, [[0.5, 0.25]]).tolist()
    [0.0]
    """
    return arm_mean(scenario, 1, X) - arm_mean(scenario, 0, X)


def true_cdte(scenario, X, grid):
    """
    Generative outcome densities per arm on the grid, shape (2, m, G)
    with the control arm first.
    """
    z = _z(X)
    arms = []
    for t in (0, 1):
        density = np.zeros((len(z), len(grid)))
        for weight, mean in _components(scenario, t, z):
            density += weight * scipy.stats.norm.pdf(
                grid.points[None, :], loc=np.asarray(mean)[:, None], scale=scenario.sd
            )
        arms.append(density)
    return np.stack(arms)


def simulation_grid(cfg, size=201):
    """
    Outcome grid wide enough for every component mean the model can
    produce, padded by six noise deviations.

    >>> grid = simulation_grid(SimConfig(p=1, noise=0.5, noise_reading='sd'))
    >>> float(grid.points[0]), float(grid.points[-1])
    (-6.0, 6.0)
    """
    bound = 3 * cfg.p + 6 * cfg.sd
    return OutcomeGrid.uniform(-bound, bound, size)


class Simulation(typing.NamedTuple):
    scenario: Scenario
    obs: ObservationalDataset
    rct: TrialDataset
    test: np.ndarray


def simulate(cfg, rng=None, test_size=1000):
    """
    Draw a scenario, its datasets and evaluation points, in that order,
    from one generator (seeded by ``cfg.seed`` unless given).
    """
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    scenario = gen_scenario(cfg, rng)
    obs = gen_observational(cfg, scenario, rng)
    rct = gen_trial(cfg, scenario, rng)
    test = gen_test_points(cfg, rng, test_size)
    log.debug("simulated %s with %s", scenario, cfg)
    return Simulation(scenario, obs, rct, test)
