"""Conditional density prediction by regression of orthonormal-polynomial moments."""

from .basis import (
    BasisSet,
    BasisSpec,
    design_matrix,
    enumerate_basis,
    legendre_eval,
    product_eval,
)
from .evaluation import EvalReport, FoldPlan, cross_validate, log_likelihood, make_folds, sorted_density_curve
from .model import (
    CalibratedDensity,
    HcrModel,
    RawDensity,
    calibrate,
    density_at,
    density_expectation,
    density_modes,
    density_variance,
    estimate_moments,
    fit,
    load_model,
    predict_raw,
    save_model,
)
from .normalize import EdfMap, denormalize_density, fit_edf, normalize

__version__ = "0.1.0"
