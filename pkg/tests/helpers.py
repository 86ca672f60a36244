"""Shared builders for tests: random states, synthetic datasets, fits."""

import numpy as np

from slpm.data import WeightMatrix
from slpm.inference import FitConfig, fit
from slpm.initialization import InitConfig, initialize_state
from slpm.model import Hyperparams, VariationalState
from slpm.simulate import SimulationConfig, average_network, sample_parameters


def random_state(rng, M, N, K, masked=True):
    """A valid variational state with populated responsibilities."""
    resp = rng.dirichlet(np.ones(K), size=(M, N))
    if masked:
        mask = rng.random((M, N)) < 0.85
        mask[0, 0] = True
    else:
        mask = np.ones((M, N), dtype=bool)
    resp[~mask] = 0.0
    state = VariationalState(
        resp=resp,
        alpha_u=rng.standard_normal((M, K)),
        beta_u=rng.gamma(2.0, 0.5, (M, K)),
        alpha_v=rng.standard_normal((N, K)),
        beta_v=rng.gamma(2.0, 0.5, (N, K)),
        dirichlet=rng.gamma(2.0, 1.0, K),
        gamma_shape=rng.gamma(2.0, 1.0, K),
        gamma_rate=rng.gamma(2.0, 1.0, K),
        step_u=np.full(M, 0.1),
        step_v=np.full(N, 0.1),
    )
    return state, mask


def random_problem(rng, M, N, K, masked=True):
    """State plus matching data and hyperparameters."""
    state, mask = random_state(rng, M, N, K, masked=masked)
    data = WeightMatrix(rng.exponential(1.0, (M, N)), mask=mask)
    hyper = Hyperparams(rng.gamma(2.0, 1.0, K), rng.gamma(2.0, 1.0, K),
                        rng.gamma(2.0, 1.0, K))
    return state, data, hyper


def planted_average_network(M, N, seed, K_true=3, position_law="normal",
                            mixing="uniform"):
    """Deterministic network from randomly drawn ground-truth parameters."""
    cfg = SimulationConfig(M=M, N=N, K_true=K_true, mixing=mixing,
                           position_law=position_law, seed=seed)
    params = sample_parameters(cfg)
    return average_network(params), params


def default_fit(data, K=8, delta=0.001, seed=0, **config_kw):
    hyper = Hyperparams.default(K, delta=delta)
    state0 = initialize_state(data, hyper, InitConfig(seed=seed))
    return fit(data, hyper, state0, FitConfig(seed=seed, **config_kw))


def trace_is_monotone(trace, rel=1e-8):
    trace = np.asarray(trace)
    diffs = np.diff(trace)
    scale = np.maximum(1.0, np.abs(trace[:-1]))
    return bool(np.all(diffs >= -rel * scale))
