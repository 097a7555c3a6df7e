"""
Observational and trial datasets and their CSV schemas.

Observational files carry ``m,t,x1,...,xp,y``; trial files
``t,x1,...,xp,y``; test files ``x1,...,xp``. Values are written with
17 significant digits so that a dataset survives a round trip exactly.
"""

import dataclasses
import logging

import numpy as np
import pandas as pd

from .kernel import as_matrix


__all__ = [
    'MissingCellError',
    'SchemaError',
    'ObservationalDataset',
    'TrialDataset',
    'covariate_names',
    'read_observational',
    'read_trial',
    'read_covariates',
    'write_observational',
    'write_trial',
    'write_covariates',
]

log = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'


class MissingCellError(ValueError):
    """
    A required (m, t) cell or trial arm has no rows.
    """


class SchemaError(ValueError):
    """
    A CSV file does not follow its schema.
    """


def _labels(values, name):
    values = np.asarray(values)
    as_int = values.astype(int)
    if not np.all((as_int == values) & np.isin(as_int, (0, 1))):
        raise ValueError(f"{name} labels must be 0 or 1")
    return as_int


@dataclasses.dataclass(frozen=True, eq=False)
class ObservationalDataset:
    """
    Confounded observational rows: covariates, treatment, time step
    (0 before assignment, 1 after) and outcome.
    """

    X: np.ndarray
    t: np.ndarray
    m: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = as_matrix(self.X)
        object.__setattr__(self, 'X', X)
        object.__setattr__(self, 't', _labels(self.t, 'treatment'))
        object.__setattr__(self, 'm', _labels(self.m, 'time step'))
        object.__setattr__(self, 'y', np.asarray(self.y, dtype=float).ravel())
        if not len(X) == len(self.t) == len(self.m) == len(self.y):
            raise ValueError("covariates, labels and outcomes differ in length")

    @property
    def p(self):
        return self.X.shape[1]

    def __len__(self):
        return len(self.y)

    def _rows(self, mask, label):
        if not np.any(mask):
            raise MissingCellError(f"observational cell {label} is empty")
        return self.X[mask], self.y[mask]

    def cell(self, m, t):
        """
        Covariates and outcomes of one (m, t) cell.
        """
        return self._rows((self.m == m) & (self.t == t), f"(m={m}, t={t})")

    def step(self, m):
        """
        Covariates and outcomes of one time step, pooled over treatments.
        """
        return self._rows(self.m == m, f"(m={m}, t=any)")

    def counts(self):
        return {
            (m, t): int(np.sum((self.m == m) & (self.t == t)))
            for m in (0, 1)
            for t in (0, 1)
        }


@dataclasses.dataclass(frozen=True, eq=False)
class TrialDataset:
    """
    Randomized trial rows at the post-assignment time step.
    """

    X: np.ndarray
    t: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = as_matrix(self.X)
        object.__setattr__(self, 'X', X)
        object.__setattr__(self, 't', _labels(self.t, 'treatment'))
        object.__setattr__(self, 'y', np.asarray(self.y, dtype=float).ravel())
        if not len(X) == len(self.t) == len(self.y):
            raise ValueError("covariates, labels and outcomes differ in length")

    @property
    def p(self):
        return self.X.shape[1]

    def __len__(self):
        return len(self.y)

    def arm(self, t):
        mask = self.t == t
        if not np.any(mask):
            raise MissingCellError(f"trial arm t={t} is empty")
        return self.X[mask], self.y[mask]


def covariate_names(p):
    """
    >>> covariate_names(3)
    ['x1', 'x2', 'x3']
    """
    return [f'x{j}' for j in range(1, p + 1)]


def _parse(text):
    try:
        return float(text)
    except (TypeError, ValueError):
        return np.nan


def _read(path, leading, trailing, p=None):
    """
    Load a schema-checked CSV as a dict of column name to float array.
    """
    try:
        raw = pd.read_csv(
            path,
            header=None,
            dtype=str,
            keep_default_na=False,
            skipinitialspace=True,
        )
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise SchemaError(f"{path}: {exc}") from exc
    columns = [str(name).strip() for name in raw.iloc[0]]
    frame = raw.iloc[1:].reset_index(drop=True)
    width = len(columns) - len(leading) - len(trailing) if p is None else p
    expected = leading + covariate_names(max(width, 1)) + trailing
    if columns != expected:
        raise SchemaError(f"{path}: header {columns} does not match {expected}")
    values = np.vectorize(_parse, otypes=[float])(frame.to_numpy(dtype=object))
    bad = np.argwhere(~np.isfinite(values))
    if len(bad):
        row, col = bad[0]
        raise SchemaError(
            f"{path}: line {row + 2}, column {columns[col]!r}: "
            f"{frame.iat[row, col]!r} is not a number"
        )
    for col, name in enumerate(columns):
        if name not in ('m', 't'):
            continue
        off = np.flatnonzero(~np.isin(values[:, col], (0.0, 1.0)))
        if len(off):
            row = off[0]
            raise SchemaError(
                f"{path}: line {row + 2}, column {name!r}: "
                f"label {frame.iat[row, col]!r} is not 0 or 1"
            )
    return {name: values[:, col] for col, name in enumerate(columns)}


def _covariates(columns):
    return np.column_stack(
        [values for name, values in columns.items() if name.startswith('x')]
    )


def read_observational(path, p=None):
    columns = _read(path, ['m', 't'], ['y'], p)
    log.info("read %d observational rows from %s", len(columns['y']), path)
    return ObservationalDataset(
        X=_covariates(columns), t=columns['t'], m=columns['m'], y=columns['y']
    )


def read_trial(path, p=None):
    columns = _read(path, ['t'], ['y'], p)
    log.info("read %d trial rows from %s", len(columns['y']), path)
    return TrialDataset(X=_covariates(columns), t=columns['t'], y=columns['y'])


def read_covariates(path, p=None):
    return _covariates(_read(path, [], [], p))


def _write(frame, path):
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, encoding='utf-8')
    log.info("wrote %d rows to %s", len(frame), path)


def _covariate_frame(X):
    X = as_matrix(X)
    return pd.DataFrame(X, columns=covariate_names(X.shape[1]))


def write_observational(obs, path):
    frame = _covariate_frame(obs.X)
    frame.insert(0, 't', obs.t)
    frame.insert(0, 'm', obs.m)
    frame['y'] = obs.y
    _write(frame, path)


def write_trial(rct, path):
    frame = _covariate_frame(rct.X)
    frame.insert(0, 't', rct.t)
    frame['y'] = rct.y
    _write(frame, path)


def write_covariates(X, path):
    _write(_covariate_frame(X), path)
