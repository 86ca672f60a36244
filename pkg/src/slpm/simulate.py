"""Synthetic data generators for the latent-distance mixture model.

Two data modes are provided: sampled edge weights (each edge draws a
component, then an exponential with rate equal to the squared coordinate
gap in that component) and the deterministic average network whose entry
(i, j) is the mixing-weighted sum of inverse squared gaps.  A homogeneous
gamma-mixed exponential generator serves as a misspecified benchmark.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .data import WeightMatrix
from .model import GenerativeParams


class SimulationError(ValueError):
    """Raised for degenerate generative parameters."""


@dataclass
class SimulationConfig:
    """Generative choices: sizes, mixing law, position law and seed.

    ``mixing`` is either an explicit probability vector, "uniform"
    (all 1/K) or "dirichlet" (drawn from Dirichlet(delta)).  Positions
    follow a standard normal under ``position_law='normal'`` or the
    gamma hierarchy (precision Gamma(a, b), coordinates centered normal
    with variance 1/precision) under ``position_law='hierarchical'``.
    """

    M: int
    N: int
    K_true: int
    mixing: object = "uniform"
    delta: float = 1.0
    position_law: str = "normal"
    a: float = 1.0
    b: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.M < 1 or self.N < 1 or self.K_true < 1:
            raise SimulationError("all counts must be at least 1")
        if self.position_law not in ("normal", "hierarchical"):
            raise SimulationError("position_law must be 'normal' or 'hierarchical'")
        if isinstance(self.mixing, str):
            if self.mixing not in ("uniform", "dirichlet"):
                raise SimulationError("mixing must be a vector, 'uniform' or 'dirichlet'")
        else:
            self.mixing = np.asarray(self.mixing, dtype=float)
            if self.mixing.shape != (self.K_true,):
                raise SimulationError("explicit mixing must have length K_true")
            if abs(self.mixing.sum() - 1.0) > 1e-10 or np.any(self.mixing < 0):
                raise SimulationError("explicit mixing must be a probability vector")


def sample_parameters(config: SimulationConfig) -> GenerativeParams:
    """Draw mixing, precisions and positions (no edges yet)."""
    rng = np.random.default_rng(config.seed)
    K = config.K_true
    if isinstance(config.mixing, str):
        if config.mixing == "uniform":
            mixing = np.full(K, 1.0 / K)
        else:
            mixing = rng.dirichlet(np.full(K, config.delta))
    else:
        mixing = config.mixing.copy()
    if config.position_law == "hierarchical":
        precisions = rng.gamma(shape=config.a, scale=1.0 / config.b, size=K)
        U = rng.standard_normal((config.M, K)) / np.sqrt(precisions)
        V = rng.standard_normal((config.N, K)) / np.sqrt(precisions)
    else:
        precisions = np.ones(K)
        U = rng.standard_normal((config.M, K))
        V = rng.standard_normal((config.N, K))
    return GenerativeParams(mixing, precisions, U, V)


def sample_weights(params: GenerativeParams, seed: int = 0) -> tuple[WeightMatrix, np.ndarray]:
    """Sample allocations and exponential edge weights for fixed parameters.

    Returns the weight matrix and the (M, N) array of 0-based component
    allocations.  A coordinate pair coinciding exactly in the allocated
    component would give a zero rate; the sender coordinate is then
    redrawn with a warning.
    """
    rng = np.random.default_rng(seed)
    M, K = params.U.shape
    N = params.V.shape[0]
    Z = rng.choice(K, size=(M, N), p=params.mixing)
    U, V = params.U, params.V
    uz = U[np.arange(M)[:, None], Z]
    vz = V[np.arange(N)[None, :], Z]
    theta = (uz - vz) ** 2
    guard = 0
    while np.any(theta == 0.0):
        guard += 1
        if guard > 100:
            raise SimulationError("could not avoid zero squared distances")
        warnings.warn("zero squared distance encountered; resampling sender coordinates")
        bad = np.argwhere(theta == 0.0)
        for i, j in bad:
            k = Z[i, j]
            U = U.copy()
            U[i, k] = rng.standard_normal() / np.sqrt(params.precisions[k])
        uz = U[np.arange(M)[:, None], Z]
        theta = (uz - vz) ** 2
    params.U = U
    params.allocations = Z
    x = rng.exponential(scale=1.0 / theta)
    return WeightMatrix(x), Z


def sample_network(config: SimulationConfig) -> tuple[WeightMatrix, GenerativeParams]:
    """Draw parameters and a full sampled network; reproducible by seed."""
    params = sample_parameters(config)
    data, _ = sample_weights(params, seed=config.seed + 1)
    return data, params


def average_network(params: GenerativeParams) -> WeightMatrix:
    """Deterministic network of mixing-weighted inverse squared gaps."""
    diff = params.U[:, None, :] - params.V[None, :, :]
    live = params.mixing > 0
    coincident = (diff == 0.0) & live[None, None, :]
    if np.any(coincident):
        i, j, k = np.argwhere(coincident)[0]
        raise SimulationError(
            "sender %d and receiver %d coincide exactly in component %d"
            % (i, j, k))
    with np.errstate(divide="ignore"):
        x = (params.mixing[live] * diff[:, :, live] ** -2.0).sum(axis=2)
    return WeightMatrix(x)


def homogeneous_network(M: int, N: int, seed: int = 0) -> WeightMatrix:
    """Edges exponential with independent Gamma(1,1) rates (Lomax marginal)."""
    if M < 1 or N < 1:
        raise SimulationError("all counts must be at least 1")
    rng = np.random.default_rng(seed)
    theta = rng.gamma(shape=1.0, scale=1.0, size=(M, N))
    x = rng.exponential(scale=1.0 / theta)
    return WeightMatrix(x)
