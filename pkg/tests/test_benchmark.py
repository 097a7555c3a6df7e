import contextlib
import unittest
from unittest import mock

import numpy as np

from hullmix import benchmark, estimators
from hullmix.benchmark import BenchmarkConfig, Replication, RunReport
from hullmix.kernel import DegenerateDataError

from ._support import parameterize, temp_dir


def small_config(**options):
    settings = dict(
        regimes=('holds',),
        rates=(0,),
        dims=(1,),
        replications=3,
        roster=(estimators.OBS_ONLY, estimators.RCT_ONLY, estimators.OLT),
        n_obs=80,
        n_rct=20,
        n_test=25,
        lambdas=(1e-3, 1e-1),
        bootstrap_draws=50,
    )
    settings.update(options)
    return BenchmarkConfig(**settings)


def broken(components):
    raise RuntimeError("solver exploded")


def degenerate(components):
    raise DegenerateDataError("no penalty in (0.001,) gives a solvable system")


class Flaky:
    """
    Fits normally except on the calls numbered in ``failing``.
    """

    def __init__(self, kind, failing):
        self.kind = kind
        self.failing = set(failing)
        self.calls = 0

    def __call__(self, components):
        self.calls += 1
        if self.calls in self.failing:
            raise ArithmeticError("singular system")
        return estimators.fit_cate(self.kind, components)


class TestSeeds(unittest.TestCase):
    def test_splitmix(self):
        assert benchmark.splitmix64(0) == 0xE220A8397B1DCDAF
        assert benchmark.splitmix64(2**64 - 1) < 2**64

    def test_replication_seeds_differ(self):
        seeds = {benchmark.replication_seed(7, index) for index in range(100)}
        assert len(seeds) == 100
        assert benchmark.replication_seed(7, 3) == benchmark.splitmix64(10)


class TestConfig(unittest.TestCase):
    @parameterize(
        'options',
        [
            (dict(regimes=('sometimes',)),),
            (dict(rates=(100,)),),
            (dict(dims=(0,)),),
            (dict(rates=()),),
            (dict(replications=0),),
            (dict(jobs=0),),
            (dict(roster=('och3',)),),
            (dict(density_roster=(estimators.OLT,)),),
            (dict(targets='ate'),),
            (dict(seed=-1),),
        ],
    )
    def test_invalid(self, options):
        with self.assertRaises(ValueError):
            small_config(**options)

    def test_scalars_become_sequences(self):
        cfg = small_config(rates=50, dims=3)
        assert cfg.rates == (50,)
        assert cfg.dims == (3,)
        assert cfg.cells() == [('holds', 50, 3)]

    def test_overrides(self):
        cfg = BenchmarkConfig.from_mapping(
            {'replications': 5, 'seed': 3}, replications=2, seed=None
        )
        assert cfg.replications == 2
        assert cfg.seed == 3

    def test_threshold(self):
        assert small_config().threshold == 0.05 / 9

    def test_targets(self):
        assert small_config(targets='both').targets_run() == ('cate', 'cdte')
        assert small_config(targets='cdte').roster_for('cdte') == (
            estimators.CDTE_ESTIMATORS
        )


class TestReplication(unittest.TestCase):
    def test_scores_every_estimator(self):
        cfg = small_config(targets='both', density_roster=(estimators.OBS_ONLY,))
        result = benchmark.run_replication(cfg, Replication('holds', 0, 1, 0))
        assert set(result.metrics) == {
            ('cate', estimators.OBS_ONLY),
            ('cate', estimators.RCT_ONLY),
            ('cate', estimators.OLT),
            ('cdte', estimators.OBS_ONLY),
        }
        assert all(value >= 0 for value in result.metrics.values())
        assert result.seed == benchmark.replication_seed(0, 0)

    def test_replayable(self):
        cfg = small_config()
        replication = Replication('holds', 0, 1, 2)
        first = benchmark.run_replication(cfg, replication)
        second = benchmark.run_replication(cfg, replication)
        assert first.metrics == second.metrics

    def test_failure_is_isolated(self):
        cfg = small_config()
        fitters = {('cate', estimators.OLT): broken}
        with self.assertLogs('hullmix.benchmark', 'WARNING') as logs:
            result = benchmark.run_replication(
                cfg, Replication('holds', 0, 1, 0), fitters
            )
        assert result.metrics['cate', estimators.OLT] is None
        assert result.metrics['cate', estimators.OBS_ONLY] is not None
        assert 'solver exploded' in logs.output[0]

    def test_degenerate_data_is_isolated(self):
        fitters = {('cate', estimators.RCT_ONLY): degenerate}
        with self.assertLogs('hullmix.benchmark', 'WARNING') as logs:
            result = benchmark.run_replication(
                small_config(), Replication('holds', 0, 1, 0), fitters
            )
        assert result.metrics['cate', estimators.RCT_ONLY] is None
        assert result.metrics['cate', estimators.OLT] is not None
        assert 'solvable' in logs.output[0]

    def test_shared_setup_failure_is_isolated(self):
        cfg = small_config(targets='both', density_roster=(estimators.OBS_ONLY,))
        failing = mock.patch.object(
            benchmark, 'true_cate', side_effect=FloatingPointError("overflow")
        )
        with failing, self.assertLogs('hullmix.benchmark', 'WARNING') as logs:
            result = benchmark.run_replication(cfg, Replication('holds', 0, 1, 0))
        assert all(result.metrics['cate', kind] is None for kind in cfg.roster)
        assert result.metrics['cdte', estimators.OBS_ONLY] is not None
        assert 'cate setup failed: overflow' in logs.output[0]

    def test_simulation_failure_is_isolated(self):
        cfg = small_config(targets='both', density_roster=(estimators.OBS_ONLY,))
        failing = mock.patch.object(
            benchmark, 'simulate', side_effect=MemoryError("no room")
        )
        with failing, self.assertLogs('hullmix.benchmark', 'WARNING') as logs:
            result = benchmark.run_replication(cfg, Replication('holds', 0, 1, 0))
        assert len(result.metrics) == 4
        assert all(value is None for value in result.metrics.values())
        assert 'simulation failed: no room' in logs.output[0]


class TestSummaries(unittest.TestCase):
    def test_failures_counted(self):
        rng = np.random.default_rng(0)
        samples = [1.0, None, 2.0, 3.0, None, 5.0]
        summary = benchmark.summarize(samples, 6, rng, 50)
        assert summary.count == 4
        assert summary.failures == 2
        assert summary.unreliable
        assert summary.median == 2.5
        assert summary.samples == samples

    def test_few_failures_are_reliable(self):
        samples = [float(value) for value in range(19)] + [None]
        summary = benchmark.summarize(samples, 20, np.random.default_rng(1), 50)
        assert not summary.unreliable
        assert summary.lower <= summary.median <= summary.upper

    def test_all_failed(self):
        summary = benchmark.summarize([None, None], 2, np.random.default_rng(2), 50)
        assert summary.median is None
        assert summary.unreliable

    def test_best_block(self):
        rng = np.random.default_rng(3)
        samples = {
            estimators.OCH2: list(rng.uniform(0, 1, 40)),
            estimators.OLT: list(rng.uniform(0, 1, 40) + 0.02),
            estimators.RCT_ONLY: list(rng.uniform(5, 6, 40)),
        }
        summaries = {
            kind: benchmark.summarize(values, 40, rng, 50)
            for kind, values in samples.items()
        }
        mood, best = benchmark.compare(summaries, 'cate', 0.05 / 9)
        assert set(best) == {estimators.OCH2, estimators.OLT}
        assert set(mood) == {estimators.OCH2}
        assert mood[estimators.OCH2][estimators.RCT_ONLY] < 1e-6


class TestRunBenchmark(unittest.TestCase):
    def setUp(self):
        self.fixtures = contextlib.ExitStack()
        self.addCleanup(self.fixtures.close)
        self.tmp = self.fixtures.enter_context(temp_dir())

    def test_report(self):
        cfg = small_config(rates=(0, 50))
        report = benchmark.run_benchmark(cfg)
        assert len(report.cells) == 2
        cell = report.cell('cate', 'holds', 50, 1)
        assert set(cell.estimators) == set(cfg.roster)
        assert all(len(s.samples) == 3 for s in cell.estimators.values())
        assert cell.best
        assert len(report.seeds['replications']) == 3
        samples = cell.metric_samples()
        assert len(samples) == 3 * len(cfg.roster)
        assert {sample.replication for sample in samples} == {0, 1, 2}

    def test_missing_cell(self):
        report = benchmark.run_benchmark(small_config(replications=1))
        with self.assertRaises(KeyError):
            report.cell('cate', 'violated', 0, 1)

    def test_pool_size_does_not_matter(self):
        cfg = small_config(replications=4)
        serial = benchmark.run_benchmark(cfg)
        pooled = benchmark.run_benchmark(small_config(replications=4, jobs=2))
        assert serial.cells == pooled.cells

    def test_broken_estimator_flagged(self):
        cfg = small_config()
        report = benchmark.run_benchmark(cfg, {('cate', estimators.OLT): broken})
        summary = report.cell('cate', 'holds', 0, 1).estimators[estimators.OLT]
        assert summary.failures == 3
        assert summary.unreliable
        assert summary.median is None
        assert estimators.OLT not in report.cells[0].best

    def test_pooled_failures(self):
        cfg = small_config(replications=4, jobs=2)
        fitters = {
            ('cate', estimators.OLT): broken,
            ('cate', estimators.RCT_ONLY): degenerate,
        }
        report = benchmark.run_benchmark(cfg, fitters)
        cell = report.cells[0]
        for kind in (estimators.OLT, estimators.RCT_ONLY):
            assert cell.estimators[kind].failures == 4
            assert cell.estimators[kind].median is None
        assert cell.estimators[estimators.OBS_ONLY].count == 4
        assert cell.best == [estimators.OBS_ONLY]

    def test_occasional_failure(self):
        cfg = small_config(replications=4)
        fitters = {('cate', estimators.OLT): Flaky(estimators.OLT, failing={2})}
        report = benchmark.run_benchmark(cfg, fitters)
        summary = report.cells[0].estimators[estimators.OLT]
        assert summary.samples[1] is None
        assert summary.count == 3
        assert summary.unreliable

    def test_json_round_trip(self):
        report = benchmark.run_benchmark(small_config(replications=2))
        assert RunReport.from_json(report.to_json()) == report

    def test_tables(self):
        cfg = small_config(rates=(0, 50), dims=(1, 2), replications=2)
        report = benchmark.run_benchmark(cfg)
        by_rate = benchmark.emit_table(report, 'accuracy-by-rate', p=2).splitlines()
        assert by_rate[0] == 'estimator,0,50'
        assert len(by_rate) == 1 + len(cfg.roster)
        by_p = benchmark.emit_table(report, 'accuracy-by-p', rate=50).splitlines()
        assert by_p[0] == 'estimator,1,2'
        curves = benchmark.emit_table(report, 'stability-curves', p=1).splitlines()
        assert curves[0] == 'rate,estimator,median,lower,upper,skewness'
        assert len(curves) == 1 + 2 * len(cfg.roster)

    def test_table_needs_a_choice(self):
        report = benchmark.run_benchmark(small_config(dims=(1, 2), replications=1))
        with self.assertRaisesRegex(ValueError, 'several p'):
            benchmark.emit_table(report, 'accuracy-by-rate')

    def test_table_errors(self):
        report = benchmark.run_benchmark(small_config(replications=1))
        with self.assertRaises(ValueError):
            benchmark.emit_table(report, 'scatter')
        with self.assertRaises(ValueError):
            benchmark.emit_table(report, 'accuracy-by-rate', regime='violated')

    def test_failed_estimator_leaves_table_out(self):
        report = benchmark.run_benchmark(
            small_config(replications=1), {('cate', estimators.OLT): broken}
        )
        with self.assertRaisesRegex(ValueError, 'missing cells'):
            benchmark.emit_table(report, 'accuracy-by-rate')
        with self.assertLogs('hullmix.benchmark', 'WARNING'):
            written = benchmark.write_tables(report, self.tmp)
        names = {path.name for path in written}
        assert 'accuracy-by-rate-cate-holds-p1.csv' not in names
        assert 'stability-curves-cate-holds-p1.csv' in names

    def test_write_tables(self):
        report = benchmark.run_benchmark(small_config(replications=2))
        written = benchmark.write_tables(report, self.tmp / 'out')
        assert {path.name for path in written} == {
            'report.json',
            'accuracy-by-rate-cate-holds-p1.csv',
            'stability-curves-cate-holds-p1.csv',
            'accuracy-by-p-cate-holds-r0.csv',
        }
        assert all(path.exists() for path in written)
