"""Bias-corrected regression under privilegedly-missing-at-random selection.

The package provides four estimation strategies for regressing a response on
features when the response is observed only for a selected subsample and the
selection depends on privileged variables (available at training time only):
a naive fit on the selected rows, repeated regression, importance-weighted
regression with true or estimated weights, and a doubly robust combination.
It also ships the supporting machinery used to benchmark them: mixed-graph
separation tests and enumeration, Gaussian-process structural-equation
simulators, and the evaluation metrics for biased test data.
"""

from pmar.numerics import RngStream, sigmoid_ex1, sigmoid_steep, standardize
from pmar.graphs import Admg, enumerate_pmar_admgs, is_pmar_pattern, m_separated
from pmar.kernels import KernelSpec, draw_gp, kernel_eval
from pmar.simulate import (
    Dataset,
    SimConfig,
    bias_dataset,
    draw_rd,
    simulate_admg,
    simulate_example1,
)
from pmar.regression import KrrModel, fit_krr, fit_propensity
from pmar.estimators import (
    FitConfig,
    WeightConfig,
    compute_weights,
    fit_dr,
    fit_iw,
    fit_naive,
    fit_rr,
)
from pmar.evaluation import MetricsReport, evaluate_predictions, split_interp_extrap

__version__ = "0.1.0"

__all__ = [
    "Admg",
    "Dataset",
    "FitConfig",
    "KernelSpec",
    "KrrModel",
    "MetricsReport",
    "RngStream",
    "SimConfig",
    "WeightConfig",
    "bias_dataset",
    "compute_weights",
    "draw_gp",
    "draw_rd",
    "enumerate_pmar_admgs",
    "evaluate_predictions",
    "fit_dr",
    "fit_iw",
    "fit_krr",
    "fit_naive",
    "fit_propensity",
    "fit_rr",
    "is_pmar_pattern",
    "kernel_eval",
    "m_separated",
    "sigmoid_ex1",
    "sigmoid_steep",
    "simulate_admg",
    "simulate_example1",
    "split_interp_extrap",
    "standardize",
]
