"""Semiparametric estimation and inference for directed dyadic networks."""

from .design import PairIndexing, apply_U, apply_Ut, apply_Vinv, vinv_entry
from .errors import DataError, DyadlinkError, NumericalError
from .estimator import FitOptions, ModelFit, determine_sign, fit, transform_y
from .inference import (
    TestReport,
    ci_effects,
    ci_slopes,
    recover_support,
    similarity,
    test_heterogeneity,
    test_sparse,
)
from .network import DirectedNetwork
from .simulate import DgpSpec, McReport, generate_network, param_schedule, run_mc
from .smoothing import SmoothingPlan, select_bandwidth
from .weighted import WeightedModelFit, ci_weighted, fit_weighted

__version__ = "0.1.0"

__all__ = [
    "PairIndexing", "apply_U", "apply_Ut", "apply_Vinv", "vinv_entry",
    "DyadlinkError", "DataError", "NumericalError",
    "FitOptions", "ModelFit", "determine_sign", "fit", "transform_y",
    "TestReport", "ci_effects", "ci_slopes", "recover_support", "similarity",
    "test_heterogeneity", "test_sparse",
    "DirectedNetwork",
    "DgpSpec", "McReport", "generate_network", "param_schedule", "run_mc",
    "SmoothingPlan", "select_bandwidth",
    "WeightedModelFit", "ci_weighted", "fit_weighted",
    "__version__",
]
