"""
Command-line surface: ``simulate``, ``fit``, ``benchmark`` and ``report``.
"""

import argparse
import dataclasses
import json
import logging
import pathlib

import numpy as np
import pandas as pd

from . import benchmark, data, estimators, simgen
from .density import CONTINUOUS, DISCRETE, OutcomeGrid, silverman_bandwidth
from .kernel import DEFAULT_LAMBDAS


__all__ = ['fit_from_csv', 'main']

log = logging.getLogger(__name__)


def _outcome_grid(obs, rct, mode, size):
    outcomes = np.concatenate([obs.y, rct.y])
    if mode == DISCRETE:
        return OutcomeGrid.classes(outcomes)
    bandwidth = silverman_bandwidth(outcomes) or 1.0
    return OutcomeGrid.covering(outcomes, bandwidth, size)


def _cate_record(model):
    record = {'kind': model.kind, 'degenerate': model.degenerate}
    if model.mix is not None:
        record.update(mu0=model.mix.mu0, mu1=model.mix.mu1)
    if model.coef is not None:
        record['coefficients'] = model.coef.tolist()
    return record


def _cdte_record(model):
    return {
        'kind': model.kind,
        'mu': list(model.mu),
        'degenerate': list(model.degenerate),
        'grid': {
            'low': float(model.grid.points[0]),
            'high': float(model.grid.points[-1]),
            'size': len(model.grid),
        },
    }


def _density_frame(densities, grid):
    arms, points, size = densities.shape
    return pd.DataFrame(
        {
            'point': np.tile(np.repeat(np.arange(points), size), arms),
            'arm': np.repeat(np.arange(arms), points * size),
            'y': np.tile(grid.points, arms * points),
            'density': densities.ravel(),
        }
    )


def fit_from_csv(
    obs_path,
    rct_path,
    test_path,
    estimator,
    out,
    *,
    density=None,
    mode=CONTINUOUS,
    grid_size=201,
    lambdas=DEFAULT_LAMBDAS,
    sdd_ridge=False,
):
    """
    Fit one estimator on CSV inputs and write its predictions under
    ``out``: ``predictions.csv`` (CATE per test point), ``densities.csv``
    (per-arm densities in long form, when a density estimator is
    requested through ``density`` or ``estimator``) and ``fit.json``
    (weights, coefficients and degeneracy flags).
    """
    if estimator not in estimators.CATE_ESTIMATORS:
        if estimator not in estimators.CDTE_ESTIMATORS:
            raise ValueError(f"unknown estimator {estimator!r}")
        estimator, density = None, density or estimator
    if density is not None and density not in estimators.CDTE_ESTIMATORS:
        raise ValueError(f"unknown density estimator {density!r}")
    obs = data.read_observational(obs_path)
    rct = data.read_trial(rct_path, p=obs.p)
    test = data.read_covariates(test_path, p=obs.p)
    out = pathlib.Path(out)
    out.mkdir(parents=True, exist_ok=True)
    record = {'test_points': len(test)}
    if estimator is not None:
        components = estimators.Components(obs, rct, lambdas)
        model = estimators.fit_cate(estimator, components, sdd_ridge=sdd_ridge)
        frame = pd.DataFrame(test, columns=data.covariate_names(obs.p))
        frame['cate'] = estimators.predict_cate(model, test)
        frame.to_csv(
            out / 'predictions.csv', index=False, float_format=data.FLOAT_FORMAT
        )
        record['cate'] = _cate_record(model)
    if density is not None:
        grid = _outcome_grid(obs, rct, mode, grid_size)
        components = estimators.DensityComponents(obs, rct, grid, mode, lambdas)
        model = estimators.fit_cdte(density, components)
        densities = estimators.predict_cdte(model, test)
        _density_frame(densities, model.grid).to_csv(
            out / 'densities.csv', index=False, float_format=data.FLOAT_FORMAT
        )
        record['cdte'] = _cdte_record(model)
    (out / 'fit.json').write_text(json.dumps(record, indent=2), encoding='utf-8')
    log.info("wrote fit of %s to %s", estimator or density, out)
    return record


def cmd_simulate(args):
    cfg = simgen.SimConfig(
        p=args.p,
        n_obs=args.n_obs,
        n_rct=args.n_rct,
        exclusion_rate=args.rate,
        regime=args.regime,
        noise=args.noise,
        noise_reading=args.noise_reading,
        seed=args.seed,
    )
    sim = simgen.simulate(cfg, test_size=args.test_size)
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data.write_observational(sim.obs, out / 'obs.csv')
    data.write_trial(sim.rct, out / 'rct.csv')
    data.write_covariates(sim.test, out / 'test.csv')
    truth = pd.DataFrame(sim.test, columns=data.covariate_names(cfg.p))
    truth['cate'] = simgen.true_cate(sim.scenario, sim.test)
    truth.to_csv(out / 'truth.csv', index=False, float_format=data.FLOAT_FORMAT)
    scenario = {'config': dataclasses.asdict(cfg), 'scenario': sim.scenario.as_dict()}
    (out / 'scenario.json').write_text(json.dumps(scenario, indent=2), encoding='utf-8')


def cmd_fit(args):
    fit_from_csv(
        args.obs,
        args.rct,
        args.test,
        args.estimator,
        args.out,
        density=args.density,
        mode=DISCRETE if args.discrete else CONTINUOUS,
        grid_size=args.grid_size,
        sdd_ridge=args.sdd_ridge,
    )


BENCHMARK_FLAGS = (
    'regimes',
    'rates',
    'dims',
    'replications',
    'roster',
    'density_roster',
    'targets',
    'seed',
    'out',
    'jobs',
    'n_obs',
    'n_rct',
    'n_test',
    'noise',
    'noise_reading',
    'grid_size',
    'bootstrap_draws',
    'sdd_ridge',
)


def cmd_benchmark(args):
    settings = {}
    if args.config:
        text = pathlib.Path(args.config).read_text(encoding='utf-8')
        settings = json.loads(text)
    overrides = {name: getattr(args, name) for name in BENCHMARK_FLAGS}
    cfg = benchmark.BenchmarkConfig.from_mapping(settings, **overrides)
    report = benchmark.run_benchmark(cfg)
    benchmark.write_tables(report, cfg.out or 'benchmark')


def cmd_report(args):
    text = pathlib.Path(args.report).read_text(encoding='utf-8')
    report = benchmark.RunReport.from_json(text)
    benchmark.write_tables(report, args.out)


def _common():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        '-v', '--verbose', action='count', default=0, help="-v for INFO, -vv for DEBUG"
    )
    return common


def build_parser():
    common = _common()
    parser = argparse.ArgumentParser(
        prog='hullmix',
        description="Combine observational and trial data by convex-hull mixing.",
    )
    commands = parser.add_subparsers(dest='command', required=True)

    sim = commands.add_parser('simulate', parents=[common], help="emit synthetic CSVs")
    sim.add_argument('--p', type=int, default=2)
    sim.add_argument('--n-obs', type=int, default=1000)
    sim.add_argument('--n-rct', type=int, default=100)
    sim.add_argument('--rate', type=float, default=0.0, help="exclusion rate, percent")
    sim.add_argument('--regime', choices=simgen.REGIMES, default=simgen.HOLDS)
    sim.add_argument('--noise', type=float, default=0.1)
    readings = simgen.VARIANCE, simgen.SD
    sim.add_argument('--noise-reading', choices=readings, default=simgen.VARIANCE)
    sim.add_argument('--test-size', type=int, default=1000)
    sim.add_argument('--seed', type=int, default=0)
    sim.add_argument('--out', default='.')
    sim.set_defaults(func=cmd_simulate)

    fit = commands.add_parser('fit', parents=[common], help="fit on CSV files")
    fit.add_argument('--obs', required=True)
    fit.add_argument('--rct', required=True)
    fit.add_argument('--test', required=True)
    roster = sorted(set(estimators.CATE_ESTIMATORS + estimators.CDTE_ESTIMATORS))
    fit.add_argument('--estimator', choices=roster, default=estimators.OCH2)
    fit.add_argument(
        '--density',
        choices=estimators.CDTE_ESTIMATORS,
        help="also fit this density estimator",
    )
    fit.add_argument('--discrete', action='store_true', help="categorical outcomes")
    fit.add_argument('--grid-size', type=int, default=201)
    fit.add_argument('--sdd-ridge', action='store_true')
    fit.add_argument('--out', default='.')
    fit.set_defaults(func=cmd_fit)

    bench = commands.add_parser(
        'benchmark', parents=[common], help="run the synthetic benchmark"
    )
    bench.add_argument('--config', help="JSON file of benchmark settings")
    bench.add_argument('--regimes', nargs='+', choices=simgen.REGIMES)
    bench.add_argument('--rates', nargs='+', type=float)
    bench.add_argument('--dims', nargs='+', type=int)
    bench.add_argument('--replications', type=int)
    bench.add_argument('--roster', nargs='+', choices=estimators.CATE_ESTIMATORS)
    bench.add_argument(
        '--density-roster', nargs='+', choices=estimators.CDTE_ESTIMATORS
    )
    bench.add_argument('--targets', choices=benchmark.TARGETS)
    bench.add_argument('--seed', type=int)
    bench.add_argument('--out')
    bench.add_argument('--jobs', type=int)
    bench.add_argument('--n-obs', type=int)
    bench.add_argument('--n-rct', type=int)
    bench.add_argument('--n-test', type=int)
    bench.add_argument('--noise', type=float)
    bench.add_argument('--noise-reading', choices=readings)
    bench.add_argument('--grid-size', type=int)
    bench.add_argument('--bootstrap-draws', type=int)
    bench.add_argument('--sdd-ridge', action='store_const', const=True)
    bench.set_defaults(func=cmd_benchmark)

    report = commands.add_parser(
        'report', parents=[common], help="re-derive tables from a saved report"
    )
    report.add_argument('report', help="report.json written by benchmark")
    report.add_argument('--out', default='.')
    report.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format='%(levelname)s %(name)s: %(message)s')
    try:
        args.func(args)
    except (ValueError, OSError) as exc:
        raise SystemExit(f"hullmix: {exc}") from exc
