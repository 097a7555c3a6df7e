"""
Estimate treatment effects beyond a trial's recruitment criteria by
placing the trial's response inside the convex hull of observational
responses before and after treatment assignment.

>>> import hullmix
>>> sorted(hullmix.CDTE_ESTIMATORS)
['obs-only', 'ochd', 'rct-only', 'uncd']
"""

from .data import (
    MissingCellError,
    ObservationalDataset,
    SchemaError,
    TrialDataset,
    read_covariates,
    read_observational,
    read_trial,
)
from .density import OutcomeGrid, eval_density, fit_conditional_density
from .estimators import (
    CATE_ESTIMATORS,
    CDTE_ESTIMATORS,
    Components,
    DensityComponents,
    fit_baseline,
    fit_cate,
    fit_cdte,
    fit_density_baseline,
    fit_och_cate,
    fit_och_cdte,
    predict_cate,
    predict_cdte,
)
from .kernel import DegenerateDataError, fit_ridge, predict
from .qp import QuadratureError


__all__ = [
    'CATE_ESTIMATORS',
    'CDTE_ESTIMATORS',
    'Components',
    'DegenerateDataError',
    'DensityComponents',
    'MissingCellError',
    'ObservationalDataset',
    'OutcomeGrid',
    'QuadratureError',
    'SchemaError',
    'TrialDataset',
    'eval_density',
    'fit_baseline',
    'fit_cate',
    'fit_cdte',
    'fit_conditional_density',
    'fit_density_baseline',
    'fit_och_cate',
    'fit_och_cdte',
    'fit_ridge',
    'predict',
    'predict_cate',
    'predict_cdte',
    'read_covariates',
    'read_observational',
    'read_trial',
]
