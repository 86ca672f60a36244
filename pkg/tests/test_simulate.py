"""Generative sampling and the deterministic average network."""

import numpy as np
import pytest

from slpm.model import GenerativeParams
from slpm.simulate import (
    SimulationConfig,
    SimulationError,
    average_network,
    homogeneous_network,
    sample_network,
    sample_parameters,
    sample_weights,
)


class TestSampleWeights:
    def test_unit_rate_monte_carlo(self):
        # all coordinate gaps equal 1, so weights are standard exponentials
        M, N = 250, 400
        params = GenerativeParams([1.0], [1.0], np.ones((M, 1)), np.zeros((N, 1)))
        data, Z = sample_weights(params, seed=7)
        assert data.values.mean() == pytest.approx(1.0, abs=0.02)
        assert Z.max() == 0

    def test_degenerate_mixing_uses_single_component(self):
        rng_params = GenerativeParams(
            [1.0, 0.0, 0.0], [1.0, 1.0, 1.0],
            np.arange(6, dtype=float).reshape(2, 3) + 1,
            np.zeros((2, 3)))
        _, Z = sample_weights(rng_params, seed=3)
        assert np.all(Z == 0)

    def test_reproducible(self):
        cfg = SimulationConfig(M=6, N=5, K_true=3, mixing="uniform", seed=21)
        d1, p1 = sample_network(cfg)
        d2, p2 = sample_network(cfg)
        np.testing.assert_array_equal(d1.values, d2.values)
        np.testing.assert_array_equal(p1.allocations, p2.allocations)
        np.testing.assert_array_equal(p1.U, p2.U)


class TestSampleParameters:
    def test_uniform_mixing(self):
        cfg = SimulationConfig(M=4, N=4, K_true=5, mixing="uniform", seed=0)
        params = sample_parameters(cfg)
        np.testing.assert_allclose(params.mixing, 0.2)
        np.testing.assert_allclose(params.precisions, 1.0)

    def test_hierarchical_law(self):
        cfg = SimulationConfig(M=2000, N=4, K_true=3, mixing="dirichlet",
                               position_law="hierarchical", seed=5)
        params = sample_parameters(cfg)
        assert params.mixing.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(params.precisions > 0)
        # coordinate spread tracks the drawn precision
        emp = params.U.var(axis=0)
        np.testing.assert_allclose(emp, 1.0 / params.precisions, rtol=0.15)

    def test_config_validation(self):
        with pytest.raises(SimulationError):
            SimulationConfig(M=0, N=2, K_true=1)
        with pytest.raises(SimulationError):
            SimulationConfig(M=2, N=2, K_true=2, mixing=np.array([0.7, 0.7]))
        with pytest.raises(SimulationError):
            SimulationConfig(M=2, N=2, K_true=2, position_law="cauchy")


class TestAverageNetwork:
    def test_unit_distance(self):
        params = GenerativeParams([1.0], [1.0], np.ones((1, 1)), np.zeros((1, 1)))
        data = average_network(params)
        assert data.values[0, 0] == 1.0

    def test_two_component_mixture(self):
        params = GenerativeParams([0.5, 0.5], [1.0, 1.0],
                                  np.array([[1.0, 2.0]]), np.array([[0.0, 0.0]]))
        data = average_network(params)
        assert data.values[0, 0] == pytest.approx(0.625, rel=1e-12)

    def test_position_scaling(self, rng):
        U = rng.standard_normal((4, 3))
        V = rng.standard_normal((5, 3))
        params = GenerativeParams(np.full(3, 1 / 3), np.ones(3), U, V)
        base = average_network(params).values
        c = 2.5
        scaled = average_network(
            GenerativeParams(np.full(3, 1 / 3), np.ones(3), c * U, c * V)).values
        np.testing.assert_allclose(scaled, base / c ** 2, rtol=1e-12)

    def test_exact_coincidence_rejected(self):
        params = GenerativeParams([1.0], [1.0], np.ones((2, 1)), np.ones((2, 1)))
        with pytest.raises(SimulationError, match="component 0"):
            average_network(params)

    def test_entries_positive_finite(self, rng):
        cfg = SimulationConfig(M=20, N=20, K_true=3, mixing="uniform", seed=2)
        data = average_network(sample_parameters(cfg))
        assert np.all(data.values > 0)
        assert np.all(np.isfinite(data.values))


class TestHomogeneousNetwork:
    def test_lomax_tail_probability(self):
        data = homogeneous_network(250, 400, seed=9)
        p = float((data.values > 1.0).mean())
        assert p == pytest.approx(0.5, abs=0.01)

    def test_reproducible(self):
        a = homogeneous_network(10, 10, seed=4)
        b = homogeneous_network(10, 10, seed=4)
        np.testing.assert_array_equal(a.values, b.values)

    def test_counts_validated(self):
        with pytest.raises(SimulationError):
            homogeneous_network(0, 5)
