"""Tests for the ensemble matrices, the K/G recursions and the analytical SINR."""

import numpy as np
import pytest
from scipy.special import j0

from bidirmmse.analysis import (
    AnalysisState,
    SinrDecomposition,
    analytical_curve,
    analytical_sinr,
    build_ensemble_matrices,
    differential_equivalence_gap,
    g_recursion_step,
    k_recursion_step,
)
from bidirmmse.metrics import DegenerateSinrError, sinr_inst
from bidirmmse.signal import SystemConfig, make_spreading_codes


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@pytest.fixture(scope="module")
def single_user():
    cfg = SystemConfig(K=1)
    return cfg, make_spreading_codes(1, cfg.N, seed=0)


class TestEnsembleMatrices:
    def test_static_noise_free(self, single_user):
        cfg, codes = single_user
        m = build_ensemble_matrices(cfg, codes, 0.0, 200, noise_power=0.0)
        cc = np.outer(codes[0], codes[0])
        for n in range(3):
            np.testing.assert_allclose(m.F[n], cc, atol=1e-12)
            np.testing.assert_allclose(m.R[n], cc, atol=1e-12)

    def test_slow_fading_rank_one(self, single_user):
        cfg, codes = single_user
        m = build_ensemble_matrices(cfg, codes, 0.01, 10_000, seed=1)
        ref = np.outer(codes[0], codes[0]) * j0(2 * np.pi * 0.01)
        assert np.linalg.norm(m.F[0] - ref) / np.linalg.norm(m.F[0]) < 0.05

    def test_autocorrelation_sample_oracle(self, single_user):
        cfg, codes = single_user
        m = build_ensemble_matrices(cfg, codes, 0.05, 5000, seed=2, noise_power=0.0)
        # single user, static amplitude: R1 is c c^H scaled by E|h|^2
        cc = np.outer(codes[0], codes[0])
        scale = np.real(np.trace(m.R[0]))
        np.testing.assert_allclose(m.R[0], scale * cc, atol=1e-10)
        assert abs(scale - 1) < 0.1

    def test_decomposition_is_exhaustive(self):
        cfg = SystemConfig(K=3, N=8)
        m = build_ensemble_matrices(cfg, make_spreading_codes(3, 8, seed=0), 0.01, 2000, seed=3)
        np.testing.assert_allclose(m.R_S + m.R_I, m.R[0])
        assert np.real(np.vdot(m.w_opt, m.R[0] @ m.w_opt)) == pytest.approx(1.0)
        assert np.all(m.J_min >= 0)

    def test_bad_codes(self, single_user):
        cfg, _ = single_user
        with pytest.raises(ValueError):
            build_ensemble_matrices(cfg, np.ones((2, 16)), 0.01, 10)


def _state(rng, M, mu, J=(0.1, 0.2, 0.3)):
    A = crandn(rng, 3, M, M)
    R = np.einsum("nij,nkj->nik", A, A.conj()) + np.eye(M)
    F = R - 0.1 * np.einsum("nij,nkj->nik", A, A.conj())
    return AnalysisState.initial(F, R, J, mu)


class TestKRecursion:
    def test_zero_step(self):
        st = _state(np.random.default_rng(0), 3, 0.0)
        K0 = st.K_mat.copy()
        k_recursion_step(st)
        np.testing.assert_array_equal(st.K_mat, K0)

    def test_stationary_fixed_point(self):
        R = np.stack([np.eye(2) * (n + 1) for n in range(3)]).astype(complex)
        st = AnalysisState.initial(R, R, (0, 0, 0), 0.3)
        st.K_mat = np.array([[2.0, 0.5j], [-0.5j, 1.0]])
        K0 = st.K_mat.copy()
        k_recursion_step(st)
        np.testing.assert_allclose(st.K_mat, K0)

    def test_scalar_closed_form(self):
        F = np.array([0.8, 0.7, 0.9]).reshape(3, 1, 1)
        R = np.array([1.0, 1.0, 1.2]).reshape(3, 1, 1)
        J, mu = np.array([0.1, 0.2, 0.3]), 0.2
        st = AnalysisState.initial(F, R, J, mu)
        a = 1 + mu * np.sum(F - R)
        c = mu**2 * np.sum(R.ravel() * J)
        x = 1.0
        for _ in range(50):
            k_recursion_step(st)
            x = a * a * x + c
        assert np.isclose(st.K_mat[0, 0].real, x)

    def test_psd_preserved(self):
        st = _state(np.random.default_rng(1), 4, 0.05)
        for _ in range(200):
            k_recursion_step(st, check=True)
        assert np.allclose(st.K_mat, st.K_mat.conj().T)

    def test_driving_term_monotone(self):
        F = np.array([0.8, 0.7, 0.9]).reshape(3, 1, 1)
        R = np.ones((3, 1, 1))
        traces = []
        for scale in (1.0, 2.0, 4.0):
            st = AnalysisState.initial(F, R, scale * np.array([0.1, 0.2, 0.3]), 0.2)
            for _ in range(500):
                k_recursion_step(st)
            traces.append(st.K_mat[0, 0].real)
        assert traces[0] < traces[1] < traces[2]

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            AnalysisState.initial(np.zeros((2, 2, 2)), np.zeros((2, 2, 2)), (0, 0, 0), 0.1)
        with pytest.raises(ValueError):
            AnalysisState.initial(np.zeros((3, 2, 2)), np.zeros((3, 2, 2)), (0, -1, 0), 0.1)


class TestGRecursion:
    def test_zero_step_annihilates(self):
        st = _state(np.random.default_rng(2), 3, 0.0)
        g_recursion_step(st)
        assert not np.any(st.G_mat)

    def test_matched_correlations_annihilate(self):
        R = np.stack([np.eye(2)] * 3).astype(complex)
        st = AnalysisState.initial(R, R, (0, 0, 0), 0.5)
        g_recursion_step(st)
        assert not np.any(st.G_mat)

    def test_scalar_geometric(self):
        F = np.array([0.8, 0.7, 0.9]).reshape(3, 1, 1)
        R = np.ones((3, 1, 1))
        st = AnalysisState.initial(F, R, (0, 0, 0), 2.0)
        q = 2.0 * np.sum(F - R)
        for i in range(1, 6):
            g_recursion_step(st)
            assert np.isclose(st.G_mat[0, 0], q**i)


class TestAnalyticalSinr:
    def _decomp(self, rng, M=3):
        s = crandn(rng, M)
        A = crandn(rng, M, M)
        return np.outer(s, s.conj()), A @ A.conj().T + 0.1 * np.eye(M)

    def test_zero_error_is_optimum_ratio(self):
        st = _state(np.random.default_rng(3), 3, 0.1)
        st.K_mat[:] = 0
        st.G_mat[:] = 0
        R_S, R_I = self._decomp(np.random.default_rng(4))
        val = analytical_sinr(st, SinrDecomposition(R_S, R_I, 2.0, 0.5))
        assert np.isclose(val, 10 * np.log10(4.0))

    def test_homogeneous(self):
        st = _state(np.random.default_rng(5), 3, 0.1)
        R_S, R_I = self._decomp(np.random.default_rng(6))
        w = crandn(np.random.default_rng(7), 3)
        a = analytical_sinr(st, SinrDecomposition.from_filter(R_S, R_I, w))
        b = analytical_sinr(st, SinrDecomposition.from_filter(3 * R_S, 3 * R_I, w))
        assert np.isclose(a, b)

    def test_matches_direct_quotient(self):
        rng = np.random.default_rng(8)
        R_S, R_I = self._decomp(rng)
        w = np.linalg.solve(R_S + R_I, np.linalg.eigh(R_S)[1][:, -1])
        st = _state(rng, 3, 0.1)
        st.K_mat[:] = 0
        st.G_mat[:] = 0
        assert np.isclose(analytical_sinr(st, SinrDecomposition.from_filter(R_S, R_I, w)), sinr_inst(w, R_S, R_I))

    def test_degenerate_denominator(self):
        st = _state(np.random.default_rng(9), 2, 0.1)
        st.K_mat[:] = 0
        st.G_mat[:] = 0
        with pytest.raises(DegenerateSinrError):
            analytical_sinr(st, SinrDecomposition(np.eye(2), np.zeros((2, 2)), 1.0, 0.0))

    def test_curve_converges_negative(self):
        cfg = SystemConfig(K=2)
        m = build_ensemble_matrices(cfg, make_spreading_codes(2, cfg.N, seed=0), 0.001, 2000)
        curve = analytical_curve(m, 0.1, 5000)
        assert np.ptp(curve[-100:]) < 1e-3
        assert curve[-1] < 0


class TestEquivalenceGap:
    def _mats(self, rng, M=3):
        A = crandn(rng, M, M)
        R1 = A @ A.conj().T + np.eye(M)
        return R1, 0.5 * R1

    def test_zero_step(self):
        R1, F1 = self._mats(np.random.default_rng(0))
        gap = differential_equivalence_gap(np.stack([F1] * 3), np.stack([R1] * 3), 0.0)
        assert np.isclose(gap, 2 / 3)

    def test_algebraic_limit(self):
        R1, F1 = self._mats(np.random.default_rng(1))
        mu = 1e4
        gap = differential_equivalence_gap(np.stack([F1] * 3), np.stack([R1] * 3), mu)
        eye = np.eye(3)
        expected = np.linalg.norm(2 * eye) / np.linalg.norm(3 * (eye + mu * (F1 - R1)))
        assert np.isclose(gap, expected)
        assert gap < 1e-3

    def test_shrinks_once_drift_dominates(self):
        """The gap falls once ``mu (F1 - R1)`` outweighs the identity."""
        cfg = SystemConfig(K=1)
        codes = make_spreading_codes(1, cfg.N, seed=0)
        gaps = []
        for sigma2 in (30.0, 100.0, 1000.0):
            m = build_ensemble_matrices(cfg, codes, 0.001, 500, seed=0, noise_power=sigma2)
            gaps.append(differential_equivalence_gap(m.F, m.R, 0.1))
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] < 0.05
