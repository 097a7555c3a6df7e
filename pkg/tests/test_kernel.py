import unittest

import numpy as np

from hullmix import kernel
from hullmix.kernel import FeatureScaler, fit_ridge, fit_ridge_multi, predict

from ._support import parameterize


def naive_kernel(u, v):
    value = 1.0
    for a, b in zip(u, v):
        low = min(a, b)
        value *= 1 + a * b + a * b * low - (a + b) / 2 * low**2 + low**3 / 3
    return value


class TestSplineKernel(unittest.TestCase):
    def test_two_dimensions(self):
        expected = (1 + 0.25 + 0.125 - 0.125 + 1 / 24) ** 2
        assert np.isclose(kernel.spline_kernel([0.5, 0.5], [0.5, 0.5]), expected)

    def test_matches_loop(self):
        rng = np.random.default_rng(3)
        for u, v in rng.uniform(size=(20, 2, 3)):
            assert np.isclose(kernel.spline_kernel(u, v), naive_kernel(u, v))
            assert kernel.spline_kernel(u, v) == kernel.spline_kernel(v, u)

    def test_gram_agrees_with_kernel(self):
        rng = np.random.default_rng(4)
        A = rng.uniform(size=(5, 2))
        B = rng.uniform(size=(3, 2))
        K = kernel.gram(A, B)
        assert K.shape == (5, 3)
        for i, j in np.ndindex(*K.shape):
            assert np.isclose(K[i, j], kernel.spline_kernel(A[i], B[j]))

    def test_gram_symmetric_psd(self):
        inputs = np.random.default_rng(5).uniform(size=(40, 3))
        K = kernel.gram(inputs, inputs)
        assert np.array_equal(K, K.T)
        assert np.linalg.eigvalsh(K).min() >= -1e-8

    def test_gram_rejects_unscaled(self):
        with self.assertRaises(ValueError):
            kernel.gram([[0.5], [2.0]], [[0.5]])


class TestFeatureScaler(unittest.TestCase):
    def test_training_data_in_unit_cube(self):
        X = np.random.default_rng(0).normal(size=(50, 3)) * 10
        scaled = FeatureScaler.from_data(X).transform(X)
        assert scaled.min() == 0.0
        assert scaled.max() == 1.0

    def test_clamps_and_flat(self):
        scaler = FeatureScaler.from_data([[-1.0, 2.0], [1.0, 2.0]])
        scaled = scaler.transform([[-3.0, 7.0], [0.0, 2.0], [3.0, -1.0]])
        assert scaled.tolist() == [[0.0, 0.5], [0.5, 0.5], [1.0, 0.5]]

    def test_dimension_mismatch(self):
        scaler = FeatureScaler.from_data([[0.0, 1.0], [1.0, 0.0]])
        with self.assertRaises(ValueError):
            scaler.transform([[0.0, 1.0, 2.0]])


class TestFitRidge(unittest.TestCase):
    def test_zero_targets(self):
        model = fit_ridge([[0.0], [1.0]], [0.0, 0.0])
        assert not np.any(model.weights)
        assert not np.any(predict(model, np.linspace(-2, 2, 9)))

    def test_line(self):
        rng = np.random.default_rng(11)
        x = np.linspace(-1, 1, 20)
        y = 3 * x + 0.01 * rng.standard_normal(20)
        model = fit_ridge(x, y)
        assert np.max(np.abs(predict(model, x) - 3 * x)) < 0.05

    def test_interpolates_noiseless(self):
        x = np.linspace(0, 1, 10)
        model = fit_ridge(x, x**2, lambda_grid=[1e-8])
        assert model.lam == 1e-8
        assert np.max(np.abs(predict(model, x) - x**2)) < 1e-3

    def test_duplicate_rows_choose_larger_penalty(self):
        x = np.repeat(np.linspace(0, 1, 10), 2)
        y = np.tile([1.0, -1.0], 10)
        model = fit_ridge(x, y)
        assert model.lam > 1e-8
        assert np.all(np.isfinite(predict(model, x)))

    def test_loo_identity(self):
        rng = np.random.default_rng(2)
        X = rng.uniform(-1, 1, size=(15, 2))
        y = np.sin(3 * X[:, 0]) + X[:, 1] + 0.1 * rng.standard_normal(15)
        lam = 1e-3
        model = fit_ridge(X, y, lambda_grid=[lam])
        K = kernel.gram(model.inputs, model.inputs)
        penalty = lam * len(y)
        errors = []
        for i in range(len(y)):
            keep = np.arange(len(y)) != i
            weights, _ = kernel.solve_dual(K[np.ix_(keep, keep)], y[keep], penalty)
            errors.append((y[i] - K[i, keep] @ weights) ** 2)
        assert np.isclose(model.loo_error, np.mean(errors), rtol=1e-6)

    def test_dual_weights_solve_system(self):
        rng = np.random.default_rng(8)
        X = rng.uniform(size=(25, 2))
        y = X.sum(axis=1) + 0.1 * rng.standard_normal(25)
        model = fit_ridge(X, y, lambda_grid=[1e-2, 1e-1])
        K = kernel.gram(model.inputs, model.inputs)
        residual = (K + model.lam * len(y) * np.eye(len(y))) @ model.weights - y
        assert np.linalg.norm(residual) <= 1e-8 * max(1.0, np.linalg.norm(y))

    def test_multi_matches_single(self):
        rng = np.random.default_rng(9)
        X = rng.uniform(size=(12, 1))
        Y = rng.standard_normal((12, 3))
        multi = fit_ridge_multi(X, Y, lambda_grid=[1e-2])
        for column in range(3):
            single = fit_ridge(X, Y[:, column], lambda_grid=[1e-2])
            assert np.allclose(multi.weights[:, column], single.weights)

    def test_jitter_on_singular_system(self):
        weights, diag = kernel.solve_dual(np.ones((2, 2)), np.array([1.0, 1.0]), 0.0)
        assert np.all(np.isfinite(weights))
        assert np.all(np.isfinite(diag))

    @parameterize(
        ['X', 'y', 'lambda_grid'],
        [
            ([[0.0]], [1.0], kernel.DEFAULT_LAMBDAS),
            ([[0.0], [1.0]], [1.0, 2.0], []),
            ([[0.0], [1.0]], [1.0, 2.0], [0.1, 0.0]),
            ([[0.0], [1.0]], [1.0, 2.0, 3.0], kernel.DEFAULT_LAMBDAS),
            ([[0.0], [1.0]], [1.0, np.inf], kernel.DEFAULT_LAMBDAS),
        ],
    )
    def test_invalid_inputs(self, X, y, lambda_grid):
        with self.assertRaises(ValueError):
            fit_ridge(X, y, lambda_grid)


class TestPredict(unittest.TestCase):
    def setUp(self):
        self.model = fit_ridge([[0.0, 0.0], [1.0, 0.5], [0.5, 1.0]], [0.0, 1.0, 2.0])

    def test_empty(self):
        assert predict(self.model, np.zeros((0, 2))).shape == (0,)

    def test_dimension_mismatch(self):
        with self.assertRaises(ValueError):
            predict(self.model, [[0.0, 0.0, 0.0]])

    def test_extrapolation_is_bounded(self):
        inside = predict(self.model, [[1.0, 1.0]])
        outside = predict(self.model, [[50.0, 50.0]])
        assert np.array_equal(inside, outside)
