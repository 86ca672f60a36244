"""Sparse latent position models for nonnegative weighted networks."""

__version__ = "0.1.0"

from .data import DataError, WeightMatrix
from .evaluate import (
    distribution_summaries,
    estimate_dimensions,
    global_mean_predictor,
    log_abs_loss,
    reconstruct,
    survival_slope,
)
from .inference import (
    FitConfig,
    FitReport,
    fit,
    natural_gradient_step,
    position_gradient,
    update_dirichlet,
    update_gamma_params,
    update_responsibilities,
)
from .initialization import (
    DissimilarityMatrix,
    InitConfig,
    dissimilarity_matrix,
    initialize_state,
    nonmetric_mds,
)
from .model import (
    GenerativeParams,
    Hyperparams,
    ModelError,
    VariationalState,
    edge_moments,
    expected_log_theta,
    free_energy,
    free_energy_node_delta,
)
from .simulate import (
    SimulationConfig,
    average_network,
    homogeneous_network,
    sample_network,
    sample_weights,
)

__all__ = [
    "DataError",
    "DissimilarityMatrix",
    "FitConfig",
    "FitReport",
    "GenerativeParams",
    "Hyperparams",
    "InitConfig",
    "ModelError",
    "SimulationConfig",
    "VariationalState",
    "WeightMatrix",
    "average_network",
    "dissimilarity_matrix",
    "distribution_summaries",
    "edge_moments",
    "estimate_dimensions",
    "expected_log_theta",
    "fit",
    "free_energy",
    "free_energy_node_delta",
    "global_mean_predictor",
    "homogeneous_network",
    "initialize_state",
    "log_abs_loss",
    "natural_gradient_step",
    "nonmetric_mds",
    "position_gradient",
    "reconstruct",
    "sample_network",
    "sample_weights",
    "survival_slope",
    "update_dirichlet",
    "update_gamma_params",
    "update_responsibilities",
]
