import unittest

import numpy as np

from hullmix import evaluation
from hullmix.density import OutcomeGrid

from ._support import gaussian, parameterize


class TestErrors(unittest.TestCase):
    def test_mse(self):
        assert evaluation.mse([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0
        assert evaluation.mse([0.0, 0.0], [3.0, 4.0]) == 12.5

    @parameterize(['pred', 'truth'], [([1.0], [1.0, 2.0]), ([], [])])
    def test_mse_invalid(self, pred, truth):
        with self.assertRaises(ValueError):
            evaluation.mse(pred, truth)

    def test_mise_of_shifted_uniform(self):
        grid = OutcomeGrid.uniform(-1.0, 2.0, 1001)
        truth = ((grid.points >= 0) & (grid.points <= 1)).astype(float)
        pred = ((grid.points >= 0.5) & (grid.points <= 1.5)).astype(float)
        value = evaluation.mise(pred[None, None, :], truth[None, None, :], grid)
        assert abs(value - 1.0) < 1e-2

    def test_mise_against_zero(self):
        grid = OutcomeGrid.uniform(-4.0, 4.0, 801)
        truth = np.stack([gaussian(grid.points, 0.0, 0.1)] * 3)
        value = evaluation.mise(np.zeros_like(truth), truth, grid)
        assert abs(value - 1 / (2 * np.sqrt(np.pi * 0.1))) < 1e-3

    def test_mise_shape_mismatch(self):
        grid = OutcomeGrid.uniform(0.0, 1.0, 5)
        with self.assertRaises(ValueError):
            evaluation.mise(np.zeros((2, 3, 5)), np.zeros((2, 4, 5)), grid)


class TestMoodsMedianTest(unittest.TestCase):
    def test_separated(self):
        result = evaluation.moods_median_test(range(1, 5), range(5, 9))
        assert abs(result.statistic - 8.0) < 1e-9
        assert result.pvalue < 0.01

    def test_symmetric(self):
        rng = np.random.default_rng(0)
        a, b = rng.standard_normal(30), rng.standard_normal(45) + 0.3
        forward = evaluation.moods_median_test(a, b)
        backward = evaluation.moods_median_test(b, a)
        assert np.isclose(forward.statistic, backward.statistic)
        assert np.isclose(forward.pvalue, backward.pvalue)

    def test_ties_count_below(self):
        # pooled median is 2; the tied values join the lower group
        result = evaluation.moods_median_test([1, 2, 2], [2, 3, 4])
        assert not result.degenerate
        assert 0.0 < result.pvalue <= 1.0

    def test_calibrated_under_null(self):
        rng = np.random.default_rng(1)
        rejections = sum(
            evaluation.moods_median_test(
                rng.standard_normal(100), rng.standard_normal(100)
            ).pvalue
            < 0.05
            for _ in range(1000)
        )
        assert 0.02 <= rejections / 1000 <= 0.09

    def test_constant(self):
        assert evaluation.moods_median_test([1.0] * 4, [1.0] * 5).degenerate

    def test_empty(self):
        with self.assertRaises(ValueError):
            evaluation.moods_median_test([], [1.0])

    def test_bonferroni(self):
        assert evaluation.bonferroni() == 0.05 / 9


class TestDescriptive(unittest.TestCase):
    def test_exponential_skew(self):
        samples = np.random.default_rng(2).exponential(size=200000)
        assert abs(evaluation.skewness(samples) - 2.0) < 0.1

    def test_mirror_flips_skew(self):
        samples = np.random.default_rng(3).exponential(size=50)
        assert np.isclose(evaluation.skewness(-samples), -evaluation.skewness(samples))

    @parameterize('samples', [([1.0, 2.0],), ([4.0, 4.0, 4.0],)])
    def test_skewness_invalid(self, samples):
        with self.assertRaises(ValueError):
            evaluation.skewness(samples)

    def test_median_interval(self):
        samples = np.arange(1, 101, dtype=float)
        interval = evaluation.median_with_ci(samples, rng=np.random.default_rng(4))
        assert interval.median == 50.5
        assert interval.lower <= interval.median <= interval.upper
        assert interval.upper - interval.lower < 30

    def test_median_ignores_order(self):
        rng = np.random.default_rng(5)
        samples = rng.standard_normal(25)
        shuffled = rng.permutation(samples)
        assert (
            evaluation.median_with_ci(samples, bootstrap_draws=50).median
            == evaluation.median_with_ci(shuffled, bootstrap_draws=50).median
        )

    def test_median_needs_two(self):
        with self.assertRaises(ValueError):
            evaluation.median_with_ci([1.0])

    def test_median_interval_coverage(self):
        rng = np.random.default_rng(8)
        covered = 0
        for _ in range(500):
            samples = rng.standard_normal(51)
            interval = evaluation.median_with_ci(samples, bootstrap_draws=1000, rng=rng)
            covered += interval.lower <= 0.0 <= interval.upper
        assert 0.91 <= covered / 500 <= 0.99
