"""Dissimilarity construction, nonmetric MDS and state initialization."""

import numpy as np
import pytest

from slpm.data import WeightMatrix
from slpm.initialization import (
    DissimilarityMatrix,
    InitConfig,
    classical_mds,
    dissimilarity_matrix,
    initialize_state,
    kruskal_stress,
    nonmetric_mds,
)
from slpm.model import Hyperparams

# frozen via 30-digit mpmath arithmetic on the 2x2 example below
S_DIAG = 2.8355070093371309
S_OFF = 0.2002498439450079
D_OFF = 4.9937616943892234


class TestDissimilarity:
    def test_homogeneous_matrix(self):
        data = WeightMatrix(np.ones((2, 2)))
        diss = dissimilarity_matrix(data, epsilon=1e-12)
        np.testing.assert_allclose(diss.D, 1 - np.eye(4), atol=1e-9)

    def test_two_by_two_example(self):
        data = WeightMatrix([[4.0, 0.0], [0.0, 4.0]])
        diss = dissimilarity_matrix(data, epsilon=0.01)
        D = diss.D
        np.testing.assert_allclose(np.diag(D), 0.0)
        assert D[0, 1] == pytest.approx(1 / S_OFF, rel=1e-12)
        assert D[0, 1] == pytest.approx(D_OFF, rel=1e-10)
        # similarity values behind the reciprocals
        s_u = np.sqrt((data.values + 0.01) @ (data.values + 0.01).T / 2)
        assert s_u[0, 0] == pytest.approx(S_DIAG, rel=1e-12)
        assert s_u[0, 1] == pytest.approx(S_OFF, rel=1e-12)

    def test_block_structure(self, rng):
        M, N = 3, 5
        data = WeightMatrix(rng.exponential(1.0, (M, N)))
        eps = 1e-3
        diss = dissimilarity_matrix(data, epsilon=eps, cross="raw")
        xs = data.values + eps
        d_u = 1 / np.sqrt(xs @ xs.T / N)
        d_v = 1 / np.sqrt(xs.T @ xs / M)
        np.fill_diagonal(d_u, 0.0)
        np.fill_diagonal(d_v, 0.0)
        np.testing.assert_allclose(diss.D[:M, :M], d_u, rtol=1e-12)
        np.testing.assert_allclose(diss.D[M:, M:], d_v, rtol=1e-12)
        np.testing.assert_allclose(diss.D[:M, M:], xs, rtol=1e-12)

    def test_symmetric_zero_diagonal(self, rng):
        for cross in ("raw", "recip"):
            data = WeightMatrix(rng.exponential(1.0, (4, 6)))
            diss = dissimilarity_matrix(data, cross=cross)
            np.testing.assert_array_equal(diss.D, diss.D.T)
            np.testing.assert_array_equal(np.diag(diss.D), 0.0)

    def test_reciprocal_cross_monotonicity(self, rng):
        # under the reciprocal mode, a heavier edge never looks more distant
        x = rng.exponential(1.0, (4, 4))
        data = WeightMatrix(x)
        diss = dissimilarity_matrix(data, cross="recip")
        cross = diss.D[:4, 4:]
        order_w = np.argsort(x.ravel())
        d_sorted = cross.ravel()[order_w]
        assert np.all(np.diff(d_sorted) <= 1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            DissimilarityMatrix(np.array([[0.0, 1.0], [2.0, 0.0]]))
        with pytest.raises(ValueError):
            DissimilarityMatrix(np.array([[1.0, 1.0], [1.0, 1.0]]))


class TestClassicalMds:
    def test_recovers_euclidean_configuration(self, rng):
        pts = rng.standard_normal((12, 2))
        D = np.linalg.norm(pts[:, None] - pts[None, :], axis=2)
        coords = classical_mds(D, 2)
        rec = np.linalg.norm(coords[:, None] - coords[None, :], axis=2)
        np.testing.assert_allclose(rec, D, atol=1e-8)

    def test_extra_dimensions_are_zero(self, rng):
        pts = rng.standard_normal((6, 2))
        D = np.linalg.norm(pts[:, None] - pts[None, :], axis=2)
        coords = classical_mds(D, 5)
        np.testing.assert_allclose(coords[:, 2:], 0.0, atol=1e-7)


class TestNonmetricMds:
    def test_two_points(self):
        D = np.array([[0.0, 3.0], [3.0, 0.0]])
        res = nonmetric_mds(D, 1)
        dist = abs(res.coords[0, 0] - res.coords[1, 0])
        assert dist > 0
        assert res.stress1 == pytest.approx(0.0, abs=1e-12)

    def test_planar_recovery(self, rng):
        pts = rng.standard_normal((10, 2))
        D = np.linalg.norm(pts[:, None] - pts[None, :], axis=2)
        res = nonmetric_mds(D, 2)
        assert res.stress1 < 1e-3

    def test_rigid_motions_leave_stress_unchanged(self, rng):
        pts = rng.standard_normal((8, 2))
        D = np.linalg.norm(pts[:, None] - pts[None, :], axis=2)
        res = nonmetric_mds(D, 2)
        theta = 0.7
        R = np.array([[np.cos(theta), -np.sin(theta)],
                      [np.sin(theta), np.cos(theta)]])
        moved = res.coords @ R.T + np.array([3.0, -1.0])
        assert kruskal_stress(D, moved) == pytest.approx(
            kruskal_stress(D, res.coords), rel=1e-9, abs=1e-12)

    def test_stress_trace_non_increasing(self, rng):
        data = WeightMatrix(rng.exponential(1.0, (6, 7)))
        diss = dissimilarity_matrix(data)
        res = nonmetric_mds(diss, 3)
        assert np.all(np.diff(res.stress_trace) <= 1e-12)

    def test_degenerate_input_flagged(self):
        D = 1 - np.eye(5)
        res = nonmetric_mds(D, 2)
        assert res.degenerate
        assert res.coords.shape == (5, 2)


class TestInitializeState:
    def test_state_is_valid_except_responsibilities(self, rng):
        data = WeightMatrix(rng.exponential(1.0, (7, 5)))
        hyper = Hyperparams.default(4)
        state = initialize_state(data, hyper, InitConfig())
        assert state.resp is None
        state.validate(data)
        np.testing.assert_allclose(state.dirichlet, 1.0)
        np.testing.assert_allclose(state.gamma_shape, 1.0)
        np.testing.assert_allclose(state.gamma_rate, 1.0)
        np.testing.assert_allclose(state.step_u, 0.1)

    def test_variance_inflation_rule(self):
        rng = np.random.default_rng(99)
        data = WeightMatrix(rng.exponential(1.0, (6, 6)))
        hyper = Hyperparams.default(3)
        state = initialize_state(data, hyper, InitConfig(method="random", seed=5))
        expect_u = 20.0 * np.var(state.alpha_u)
        expect_v = 20.0 * np.var(state.alpha_v)
        np.testing.assert_allclose(state.beta_u, expect_u)
        np.testing.assert_allclose(state.beta_v, expect_v)

    def test_random_init_reproducible(self, rng):
        data = WeightMatrix(rng.exponential(1.0, (5, 4)))
        hyper = Hyperparams.default(2)
        a = initialize_state(data, hyper, InitConfig(method="random", seed=11))
        b = initialize_state(data, hyper, InitConfig(method="random", seed=11))
        np.testing.assert_array_equal(a.alpha_u, b.alpha_u)
        np.testing.assert_array_equal(a.alpha_v, b.alpha_v)

    def test_zero_variance_falls_back_to_unit(self):
        data = WeightMatrix([[2.0]])
        hyper = Hyperparams.default(1)
        with pytest.warns(UserWarning, match="zero empirical variance"):
            state = initialize_state(data, hyper, InitConfig())
        np.testing.assert_allclose(state.beta_u, 1.0)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            InitConfig(method="bogus")
        with pytest.raises(ValueError):
            InitConfig(cross="bogus")
        with pytest.raises(ValueError):
            InitConfig(epsilon=0.0)
