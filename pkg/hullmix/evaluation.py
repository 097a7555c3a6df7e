"""
Accuracy and stability metrics for benchmark replications.
"""

import logging
import typing

import numpy as np
import scipy.stats

from .density import integrate


__all__ = [
    'MetricSample',
    'MoodResult',
    'Interval',
    'mse',
    'mise',
    'moods_median_test',
    'bonferroni',
    'skewness',
    'median_with_ci',
]

log = logging.getLogger(__name__)


class MetricSample(typing.NamedTuple):
    estimator: str
    replication: int
    value: float


class MoodResult(typing.NamedTuple):
    statistic: float
    pvalue: float
    degenerate: bool = False


class Interval(typing.NamedTuple):
    median: float
    lower: float
    upper: float


def _sample(values):
    return np.asarray(values, dtype=float).ravel()


def mse(pred, truth):
    """
    Mean squared error.

    >>> mse([0, 2], [1, 1])
    1.0
    >>> mse([1, 2], [1])
    Traceback (most recent call last):
    ...
    ValueError: length mismatch: 2 != 1
    """
    pred = _sample(pred)
    truth = _sample(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {len(pred)} != {len(truth)}")
    if not len(pred):
        raise ValueError("nothing to compare")
    return float(np.mean((pred - truth) ** 2))


def mise(pred, truth, grid):
    """
    Mean, over arms and points, of the integrated squared density error.
    """
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch: {pred.shape} != {truth.shape}")
    if not pred.size:
        raise ValueError("nothing to compare")
    return float(np.mean(integrate((pred - truth) ** 2, grid)))


def moods_median_test(a, b):
    """
    Mood's median test: Pearson chi-square (1 dof, uncorrected) on the
    counts above and not above the pooled median.

    >>> result = moods_median_test([1, 2, 3, 4], [5, 6, 7, 8])
    >>> round(result.statistic, 9), round(result.pvalue, 5)
    (8.0, 0.00468)
    >>> moods_median_test([3, 3], [3, 3, 3])
    MoodResult(statistic=0.0, pvalue=1.0, degenerate=True)
    """
    a = _sample(a)
    b = _sample(b)
    if not len(a) or not len(b):
        raise ValueError("both samples must be non-empty")
    pooled = np.concatenate([a, b])
    if np.all(pooled <= np.median(pooled)):
        log.debug("no value lies above the pooled median; reporting no difference")
        return MoodResult(0.0, 1.0, degenerate=True)
    statistic, pvalue, _, _ = scipy.stats.median_test(
        a, b, ties='below', correction=False
    )
    return MoodResult(float(statistic), float(pvalue))


def bonferroni(alpha=0.05, comparisons=9):
    """
    >>> bonferroni(0.05, 5)
    0.01
    """
    return alpha / comparisons


def skewness(samples):
    """
    Sample skewness from central moments.

    >>> skewness([-1, 0, 1])
    0.0
    >>> skewness([0, 0, 0, 10]) > 0
    True
    """
    samples = _sample(samples)
    if len(samples) < 3:
        raise ValueError(f"skewness needs at least 3 values, got {len(samples)}")
    if np.ptp(samples) == 0:
        raise ValueError("skewness of a constant sample is undefined")
    return float(scipy.stats.skew(samples, bias=True))


def median_with_ci(samples, bootstrap_draws=2000, rng=None, confidence=0.95):
    """
    Sample median with a percentile-bootstrap confidence interval.

    >>> median_with_ci([2.5, 2.5, 2.5])
    Interval(median=2.5, lower=2.5, upper=2.5)
    """
    samples = _sample(samples)
    if len(samples) < 2:
        raise ValueError(f"need at least 2 values, got {len(samples)}")
    median = float(np.median(samples))
    if np.ptp(samples) == 0:
        return Interval(median, median, median)
    result = scipy.stats.bootstrap(
        (samples,),
        np.median,
        n_resamples=bootstrap_draws,
        confidence_level=confidence,
        method='percentile',
        random_state=rng,
    )
    low, high = result.confidence_interval
    return Interval(median, float(low), float(high))
