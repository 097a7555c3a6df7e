"""
Seeded synthetic benchmark: many simulated dataset pairs per
(regime, exclusion rate, dimension) cell, every estimator of the roster
fit on each, scored against the analytic ground truth and summarized
per cell.
"""

import concurrent.futures
import dataclasses
import functools
import io
import json
import logging
import pathlib
import time
import typing

import numpy as np
import pandas as pd
from more_itertools import always_iterable, one

from . import estimators
from .density import CONTINUOUS
from .evaluation import (
    MetricSample,
    bonferroni,
    median_with_ci,
    mise,
    moods_median_test,
    mse,
    skewness,
)
from .kernel import DEFAULT_LAMBDAS
from .simgen import (
    HOLDS,
    REGIMES,
    VARIANCE,
    VIOLATED,
    SimConfig,
    simulate,
    simulation_grid,
    true_cate,
    true_cdte,
)


__all__ = [
    'BenchmarkConfig',
    'RunReport',
    'CellReport',
    'EstimatorSummary',
    'splitmix64',
    'replication_seed',
    'run_replication',
    'run_benchmark',
    'emit_table',
    'write_tables',
]

log = logging.getLogger(__name__)

CATE = 'cate'
CDTE = 'cdte'
BOTH = 'both'
TARGETS = CATE, CDTE, BOTH

ACCURACY_BY_RATE = 'accuracy-by-rate'
ACCURACY_BY_P = 'accuracy-by-p'
STABILITY_CURVES = 'stability-curves'
TABLES = ACCURACY_BY_RATE, ACCURACY_BY_P, STABILITY_CURVES

RATES = 0, 25, 50, 75, 90, 95

HULL_KINDS = {
    CATE: (estimators.OCH2, estimators.OCH1),
    CDTE: (estimators.OCHD,),
}

UNRELIABLE_FRACTION = 0.1

MASK64 = (1 << 64) - 1


def splitmix64(x):
    """
    One step of the splitmix64 generator: advance the state by the
    golden-ratio increment and mix.

    >>> hex(splitmix64(0))
    '0xe220a8397b1dcdaf'
    """
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def replication_seed(base_seed, index):
    """
    Seed of replication ``index``: splitmix64(base_seed + index).
    The generator of one cell's replication is seeded with this value,
    the regime index, the rate in hundredths of a percent and p.
    """
    return splitmix64((base_seed + index) & MASK64)


@dataclasses.dataclass(frozen=True)
class BenchmarkConfig:
    regimes: tuple = (HOLDS, VIOLATED)
    rates: tuple = RATES
    dims: tuple = (1, 2)
    replications: int = 100
    roster: tuple = estimators.CATE_ESTIMATORS
    density_roster: tuple = estimators.CDTE_ESTIMATORS
    targets: str = CATE
    seed: int = 0
    out: str | None = None
    jobs: int = 1
    n_obs: int = 1000
    n_rct: int = 100
    n_test: int = 1000
    noise: float = 0.1
    noise_reading: str = VARIANCE
    grid_size: int = 201
    lambdas: tuple = DEFAULT_LAMBDAS
    bootstrap_draws: int = 2000
    sdd_ridge: bool = False
    alpha: float = 0.05
    comparisons: int = 9

    def __post_init__(self):
        for field in self._sequences():
            value = tuple(always_iterable(getattr(self, field.name)))
            object.__setattr__(self, field.name, value)
            if not value:
                raise ValueError(f"{field.name} must not be empty")
        unknown = set(self.regimes) - set(REGIMES)
        if unknown:
            raise ValueError(f"unknown regimes: {sorted(unknown)}")
        if self.targets not in TARGETS:
            raise ValueError(f"targets must be one of {TARGETS}, got {self.targets!r}")
        self._check_roster('roster', estimators.CATE_ESTIMATORS)
        self._check_roster('density_roster', estimators.CDTE_ESTIMATORS)
        for name in ('replications', 'jobs'):
            value = getattr(self, name)
            if value < 1:
                raise ValueError(f"{name} must be at least 1, got {value}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")
        for rate in self.rates:
            self.sim_config(self.regimes[0], rate, self.dims[0])
        for p in self.dims:
            self.sim_config(self.regimes[0], self.rates[0], p)

    @classmethod
    def _sequences(cls):
        return [
            field
            for field in dataclasses.fields(cls)
            if isinstance(field.default, tuple)
        ]

    def _check_roster(self, name, known):
        unknown = set(getattr(self, name)) - set(known)
        if unknown:
            raise ValueError(f"unknown estimators in {name}: {sorted(unknown)}")

    @classmethod
    def from_mapping(cls, mapping, **overrides):
        """
        Build a config from a JSON object; ``overrides`` that are not
        None take precedence.

        >>> BenchmarkConfig.from_mapping({'dims': 2}).dims
        (2,)
        >>> BenchmarkConfig.from_mapping({'reps': 3})
        Traceback (most recent call last):
        ...
        ValueError: unknown config keys: ['reps']
        """
        names = {field.name for field in dataclasses.fields(cls)}
        unknown = sorted(set(mapping) - names)
        if unknown:
            raise ValueError(f"unknown config keys: {unknown}")
        settings = dict(mapping)
        settings.update(
            (key, value) for key, value in overrides.items() if value is not None
        )
        return cls(**settings)

    def as_dict(self):
        return {
            key: list(value) if isinstance(value, tuple) else value
            for key, value in dataclasses.asdict(self).items()
        }

    def sim_config(self, regime, rate, p):
        return SimConfig(
            p=p,
            n_obs=self.n_obs,
            n_rct=self.n_rct,
            exclusion_rate=rate,
            regime=regime,
            noise=self.noise,
            noise_reading=self.noise_reading,
            seed=self.seed,
        )

    @property
    def threshold(self):
        return bonferroni(self.alpha, self.comparisons)

    def targets_run(self):
        return (CATE, CDTE) if self.targets == BOTH else (self.targets,)

    def roster_for(self, target):
        return self.roster if target == CATE else self.density_roster

    def cells(self):
        return [
            (regime, rate, p)
            for regime in self.regimes
            for rate in self.rates
            for p in self.dims
        ]


class Replication(typing.NamedTuple):
    regime: str
    rate: float
    p: int
    index: int


class ReplicationResult(typing.NamedTuple):
    replication: Replication
    seed: int
    metrics: dict
    seconds: float


def _isolated(replication, target, kind, score):
    try:
        return score()
    except Exception as exc:
        log.warning(
            "replication %d of %s: %s estimator %s failed: %s",
            replication.index,
            replication[:3],
            target,
            kind,
            exc,
        )
        return None


def _cate_scores(cfg, sim, fitters):
    components = estimators.Components(sim.obs, sim.rct, cfg.lambdas)
    truth = true_cate(sim.scenario, sim.test)
    for kind in cfg.roster:
        fit = fitters.get((CATE, kind)) or functools.partial(
            estimators.fit_cate, kind, sdd_ridge=cfg.sdd_ridge
        )
        yield kind, lambda fit=fit: mse(
            estimators.predict_cate(fit(components), sim.test), truth
        )


def _cdte_scores(cfg, sim, sim_cfg, fitters):
    grid = simulation_grid(sim_cfg, cfg.grid_size)
    components = estimators.DensityComponents(
        sim.obs, sim.rct, grid, CONTINUOUS, cfg.lambdas
    )
    truth = true_cdte(sim.scenario, sim.test, grid)
    for kind in cfg.density_roster:
        fit = fitters.get((CDTE, kind)) or functools.partial(estimators.fit_cdte, kind)
        yield kind, lambda fit=fit: mise(
            estimators.predict_cdte(fit(components), sim.test), truth, grid
        )


def _scores(cfg, target, sim, sim_cfg, fitters):
    if target == CATE:
        return list(_cate_scores(cfg, sim, fitters))
    return list(_cdte_scores(cfg, sim, sim_cfg, fitters))


def run_replication(cfg, replication, fitters=None):
    """
    Simulate one dataset pair and score every estimator of the roster.

    ``fitters`` maps (target, estimator id) to a callable taking the
    shared components and returning a fitted model, replacing the
    default fit for that estimator.

    A failure while simulating or while building the components shared
    by a target marks every estimator of that target as failed.
    """
    fitters = fitters or {}
    started = time.perf_counter()
    regime, rate, p, index = replication
    seed = replication_seed(cfg.seed, index)
    rng = np.random.default_rng([seed, REGIMES.index(regime), round(rate * 100), p])
    sim_cfg = cfg.sim_config(regime, rate, p)
    metrics = {}
    try:
        sim = simulate(sim_cfg, rng, cfg.n_test)
    except Exception as exc:
        log.warning(
            "replication %d of %s: simulation failed: %s", index, replication[:3], exc
        )
        sim = None
    for target in cfg.targets_run():
        roster = cfg.roster_for(target)
        if sim is None:
            metrics.update({(target, kind): None for kind in roster})
            continue
        try:
            scores = _scores(cfg, target, sim, sim_cfg, fitters)
        except Exception as exc:
            log.warning(
                "replication %d of %s: %s setup failed: %s",
                index,
                replication[:3],
                target,
                exc,
            )
            metrics.update({(target, kind): None for kind in roster})
            continue
        for kind, score in scores:
            metrics[target, kind] = _isolated(replication, target, kind, score)
    return ReplicationResult(replication, seed, metrics, time.perf_counter() - started)


@dataclasses.dataclass
class EstimatorSummary:
    """
    Distribution of one estimator's metric over a cell's replications.

    ``samples`` is indexed by replication; failed replications hold None.
    """

    median: float | None
    lower: float | None
    upper: float | None
    skewness: float | None
    count: int
    failures: int
    unreliable: bool
    samples: list


@dataclasses.dataclass
class CellReport:
    target: str
    regime: str
    rate: float
    p: int
    estimators: dict
    mood: dict
    best: list

    @property
    def key(self):
        return self.target, self.regime, self.rate, self.p

    def metric_samples(self):
        """
        Every successful replication's metric, by estimator.
        """
        return [
            MetricSample(kind, index, value)
            for kind, summary in self.estimators.items()
            for index, value in enumerate(summary.samples)
            if value is not None
        ]


@dataclasses.dataclass
class RunReport:
    config: dict
    threshold: float
    cells: list
    seeds: dict
    timings: dict

    def cell(self, target, regime, rate, p):
        return one(
            (cell for cell in self.cells if cell.key == (target, regime, rate, p)),
            too_short=KeyError(f"no cell {(target, regime, rate, p)} in the report"),
        )

    def to_json(self):
        return json.dumps(dataclasses.asdict(self), indent=2)

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        cells = [
            CellReport(
                **{
                    **cell,
                    'estimators': {
                        kind: EstimatorSummary(**summary)
                        for kind, summary in cell['estimators'].items()
                    },
                }
            )
            for cell in data.pop('cells')
        ]
        return cls(cells=cells, **data)


def _skewness(values):
    try:
        return skewness(values)
    except ValueError:
        return None


def summarize(samples, replications, rng, draws):
    values = [value for value in samples if value is not None]
    failures = len(samples) - len(values)
    unreliable = failures > UNRELIABLE_FRACTION * replications
    if not values:
        return EstimatorSummary(None, None, None, None, 0, failures, True, samples)
    if len(values) == 1:
        interval = (values[0],) * 3
    else:
        interval = median_with_ci(values, draws, rng)
    return EstimatorSummary(
        *map(float, interval),
        skewness=_skewness(values),
        count=len(values),
        failures=failures,
        unreliable=unreliable,
        samples=samples,
    )


def _valid(summary):
    return [value for value in summary.samples if value is not None]


def compare(summaries, target, threshold):
    """
    Mood's test p-values of each hull estimator against every other
    estimator, and the best block: the lowest median plus every
    estimator not significantly different from it.
    """
    scored = {kind: s for kind, s in summaries.items() if s.median is not None}

    def pvalue(a, b):
        return moods_median_test(_valid(scored[a]), _valid(scored[b])).pvalue

    mood = {
        hull: {other: pvalue(hull, other) for other in scored if other != hull}
        for hull in HULL_KINDS[target]
        if hull in scored
    }
    if not scored:
        return mood, []
    leader = min(scored, key=lambda kind: scored[kind].median)
    best = [leader] + [
        kind
        for kind in scored
        if kind != leader and pvalue(leader, kind) >= threshold
    ]
    return mood, best


def _run(cfg, tasks, fitters):
    replicate = functools.partial(run_replication, cfg, fitters=fitters)
    if cfg.jobs == 1:
        return list(map(replicate, tasks))
    with concurrent.futures.ProcessPoolExecutor(max_workers=cfg.jobs) as executor:
        return list(executor.map(replicate, tasks, chunksize=4))


def _aggregate(cfg, number, cell, target, results):
    regime, rate, p = cell
    outcomes = sorted(
        (result for result in results if result.replication[:3] == cell),
        key=lambda result: result.replication.index,
    )
    summaries = {}
    for position, kind in enumerate(cfg.roster_for(target)):
        entropy = [cfg.seed, number, TARGETS.index(target), position]
        samples = [result.metrics[target, kind] for result in outcomes]
        summaries[kind] = summarize(
            samples,
            cfg.replications,
            np.random.default_rng(entropy),
            cfg.bootstrap_draws,
        )
    mood, best = compare(summaries, target, cfg.threshold)
    log.info("%s %s r=%s p=%d: best %s", target, regime, rate, p, ', '.join(best))
    return CellReport(target, regime, rate, p, summaries, mood, best)


def run_benchmark(cfg, fitters=None):
    """
    Run every replication of every cell and aggregate the report.

    Replications are independent and may run in a process pool
    (``cfg.jobs``); the report is the same for any pool size, apart
    from the timings. ``fitters`` must be picklable when ``cfg.jobs``
    exceeds 1.
    """
    started = time.perf_counter()
    tasks = [
        Replication(regime, rate, p, index)
        for regime, rate, p in cfg.cells()
        for index in range(cfg.replications)
    ]
    log.info("running %d replications on %d worker(s)", len(tasks), cfg.jobs)
    results = _run(cfg, tasks, fitters)
    cells = [
        _aggregate(cfg, number, cell, target, results)
        for number, cell in enumerate(cfg.cells())
        for target in cfg.targets_run()
    ]
    return RunReport(
        config=cfg.as_dict(),
        threshold=cfg.threshold,
        cells=cells,
        seeds={
            'base': cfg.seed,
            'derivation': 'splitmix64(base + index); '
            'rng = default_rng([seed, regime index, round(rate * 100), p])',
            'replications': [
                replication_seed(cfg.seed, index) for index in range(cfg.replications)
            ],
        },
        timings={
            'wall_seconds': time.perf_counter() - started,
            'replication_seconds': sum(result.seconds for result in results),
        },
    )


def _only(values, name):
    values = sorted(set(values))
    if len(values) != 1:
        raise ValueError(f"report holds several {name} values {values}; choose one")
    return values[0]


def _select(report, target, regime, **fixed):
    cells = [
        cell
        for cell in report.cells
        if cell.target == target
        and cell.regime == regime
        and all(getattr(cell, name) == value for name, value in fixed.items())
    ]
    if not cells or not any(cell.estimators for cell in cells):
        raise ValueError(f"no {target} results for regime {regime!r} at {fixed}")
    return cells


def _accuracy(cells, axis):
    """
    Estimators by ``axis`` values, rows ordered by mean median.
    """
    frame = pd.DataFrame(
        [
            {'estimator': kind, axis: getattr(cell, axis), 'median': summary.median}
            for cell in cells
            for kind, summary in cell.estimators.items()
        ]
    )
    table = frame.pivot(index='estimator', columns=axis, values='median')
    missing = [
        f"{kind} at {axis}={column}"
        for kind, row in table.iterrows()
        for column, value in row.items()
        if pd.isna(value)
    ]
    if missing:
        raise ValueError(f"missing cells: {', '.join(missing)}")
    table = table.loc[table.mean(axis=1).sort_values(kind='stable').index]
    table.columns = [str(column) for column in table.columns]
    return table.reset_index()


def _stability(cells):
    rows = [
        {
            'rate': cell.rate,
            'estimator': kind,
            'median': summary.median,
            'lower': summary.lower,
            'upper': summary.upper,
            'skewness': summary.skewness,
        }
        for cell in sorted(cells, key=lambda cell: cell.rate)
        for kind, summary in cell.estimators.items()
    ]
    return pd.DataFrame(rows)


def emit_table(report, table, target=CATE, regime=HOLDS, p=None, rate=None):
    """
    Render one table of the report as CSV text.

    ``accuracy-by-rate`` and ``stability-curves`` are taken at one p,
    ``accuracy-by-p`` at one exclusion rate; when the report covers a
    single value it need not be given.
    """
    if table not in TABLES:
        raise ValueError(f"unknown table {table!r}; expected one of {TABLES}")
    if table == ACCURACY_BY_P:
        rate = _only((c.rate for c in report.cells), 'rate') if rate is None else rate
        frame = _accuracy(_select(report, target, regime, rate=rate), 'p')
    else:
        p = _only((c.p for c in report.cells), 'p') if p is None else p
        cells = _select(report, target, regime, p=p)
        if table == ACCURACY_BY_RATE:
            frame = _accuracy(cells, 'rate')
        else:
            frame = _stability(cells)
    buffer = io.StringIO()
    frame.to_csv(buffer, index=False, float_format='%.6g', lineterminator='\n')
    return buffer.getvalue()


def write_tables(report, out):
    """
    Write the JSON report and every table it supports under ``out``.
    """
    out = pathlib.Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / 'report.json').write_text(report.to_json(), encoding='utf-8')
    written = [out / 'report.json']
    combos = sorted({(cell.target, cell.regime) for cell in report.cells})
    for target, regime in combos:
        cells = [c for c in report.cells if (c.target, c.regime) == (target, regime)]
        requests = [
            (table, {'p': p}, f'p{p}')
            for p in sorted({cell.p for cell in cells})
            for table in (ACCURACY_BY_RATE, STABILITY_CURVES)
        ] + [
            (ACCURACY_BY_P, {'rate': rate}, f'r{rate:g}')
            for rate in sorted({cell.rate for cell in cells})
        ]
        for table, fixed, suffix in requests:
            path = out / f'{table}-{target}-{regime}-{suffix}.csv'
            try:
                text = emit_table(report, table, target, regime, **fixed)
            except ValueError as exc:
                log.warning("skipping %s: %s", path.name, exc)
                continue
            path.write_text(text, encoding='utf-8')
            written.append(path)
    log.info("wrote %d files to %s", len(written), out)
    return written
