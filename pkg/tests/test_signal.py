"""Tests for DBPSK, spreading codes and the received-signal models."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bidirmmse.signal import (
    CooperativeConfig,
    ReceivedWindow,
    SystemConfig,
    channel_matrix,
    cooperative_received_vector,
    dbpsk_decode,
    dbpsk_encode,
    generate_packet,
    make_spreading_codes,
    received_vector,
)

symbols = st.lists(st.sampled_from([-1.0, 1.0]), min_size=1, max_size=100)


class TestDbpsk:
    def test_identity_stream(self):
        assert dbpsk_encode([1, 1, 1]).tolist() == [1, 1, 1]

    def test_hand_recursion(self):
        assert dbpsk_encode([-1, 1, -1]).tolist() == [-1, -1, 1]

    def test_negative_reference(self):
        assert dbpsk_encode([1, -1], reference=-1).tolist() == [-1, 1]

    @given(symbols)
    def test_round_trip(self, a):
        assert dbpsk_decode(dbpsk_encode(a)).tolist() == a

    def test_rejects_non_binary(self):
        with pytest.raises(ValueError):
            dbpsk_encode([1, 0.5])


class TestSpreadingCodes:
    def test_unit_norm(self):
        c = make_spreading_codes(1, 4, seed=0)
        assert c.shape == (1, 4)
        assert np.isclose(np.linalg.norm(c), 1)

    def test_distinct(self):
        c = make_spreading_codes(2, 8, seed=5)
        assert np.any(c[0] != c[1])

    def test_pairwise_not_identical(self):
        c = make_spreading_codes(8, 16, seed=0)
        gram = np.abs(c @ c.T)
        assert np.all(gram[~np.eye(8, dtype=bool)] < 1 - 1e-12)

    def test_chip_values(self):
        c = make_spreading_codes(3, 16, seed=2)
        assert np.allclose(np.abs(c), 0.25)

    def test_too_many_codes(self):
        with pytest.raises(ValueError):
            make_spreading_codes(9, 4)

    def test_deterministic(self):
        assert np.array_equal(make_spreading_codes(4, 8, seed=9), make_spreading_codes(4, 8, seed=9))


def _flat(config, gains):
    return [channel_matrix([g], config.N) for g in gains]


class TestReceivedVector:
    def test_single_user_clean(self):
        cfg = SystemConfig(K=1, N=4)
        codes = make_spreading_codes(1, 4, seed=0)
        r = received_vector(cfg, _flat(cfg, [1.0]), codes, [1.0])
        np.testing.assert_allclose(r, codes[0])

    def test_superposition(self):
        cfg = SystemConfig(K=2, N=8, amplitudes=(1.0, 0.5))
        codes = make_spreading_codes(2, 8, seed=1)
        H = _flat(cfg, [0.3 + 0.2j, -0.7j])
        r = received_vector(cfg, H, codes, [1.0, 1.0])
        np.testing.assert_allclose(r, H[0] @ codes[0] + 0.5 * (H[1] @ codes[1]))

    def test_multipath_convolution(self):
        cfg = SystemConfig(K=1, N=8, L_p=2)
        codes = make_spreading_codes(1, 8, seed=3)
        g = [1.0, 0.5]
        r = received_vector(cfg, [channel_matrix(g, 8)], codes, [-1.0])
        expected = np.zeros(9, dtype=complex)
        for j in range(8):
            for l in range(2):
                expected[j + l] += g[l] * codes[0, j]
        np.testing.assert_allclose(r, -expected)

    def test_linear_in_symbols(self):
        cfg = SystemConfig(K=2, N=8)
        codes = make_spreading_codes(2, 8, seed=1)
        H = _flat(cfg, [1.0, 0.4j])
        a = received_vector(cfg, H, codes, [1.0, 1.0])
        b = received_vector(cfg, H, codes, [1.0, -1.0])
        np.testing.assert_allclose(a - b, 2 * 0.4j * codes[1])

    def test_energy_scaling(self):
        codes = make_spreading_codes(1, 8, seed=1)
        e = [
            np.linalg.norm(received_vector(SystemConfig(K=1, N=8, amplitudes=(a,)), [channel_matrix([1], 8)], codes, [1.0])) ** 2
            for a in (1.0, 2.0)
        ]
        assert np.isclose(e[1], 4 * e[0])

    def test_dimension_mismatch(self):
        cfg = SystemConfig(K=2, N=8)
        with pytest.raises(ValueError):
            received_vector(cfg, _flat(cfg, [1, 1]), make_spreading_codes(2, 4), [1.0, 1.0])
        with pytest.raises(ValueError):
            received_vector(cfg, _flat(cfg, [1]), make_spreading_codes(2, 8), [1.0, 1.0])

    def test_snr_calibration(self):
        cfg = SystemConfig(K=1, N=16, snr_db=10.0)
        pk = generate_packet(replace_n(cfg, 10_000), 0.01, np.random.default_rng(0))
        noise = pk.received - pk.symbols[0][:, None] * pk.desired
        snr = np.mean(np.sum(np.abs(pk.desired) ** 2, axis=1)) / np.mean(np.abs(noise) ** 2)
        assert abs(10 * np.log10(snr) - 10.0) < 0.3


def replace_n(cfg, n):
    from dataclasses import replace

    return replace(cfg, n_symbols=n, training_len=0)


class TestCooperative:
    def test_transparent_relay(self):
        cfg = SystemConfig(K=1, N=8)
        codes = make_spreading_codes(1, 8, seed=0)
        coop = CooperativeConfig(n_relays=1)
        r = cooperative_received_vector(coop, cfg, [1.0], [1.0], codes, [1.0])
        np.testing.assert_allclose(r, received_vector(cfg, _flat(cfg, [1.0]), codes, [1.0]))

    def test_severed_link(self):
        """With hop-2 gains at zero only destination noise reaches the receiver."""
        cfg = SystemConfig(K=2, N=8)
        codes = make_spreading_codes(2, 8, seed=0)
        coop = CooperativeConfig(n_relays=2)
        args = (coop, cfg, [1.0, 1.0], [0.0, 0.0], codes, [1.0, -1.0])
        silent = cooperative_received_vector(*args, noise_powers=(1.0, 0.0), rng=4)
        np.testing.assert_allclose(silent, 0)
        noisy = cooperative_received_vector(*args, noise_powers=(1.0, 0.5), rng=4)
        assert np.linalg.norm(noisy) > 0

    def test_nested_loop_oracle(self):
        cfg = SystemConfig(K=2, N=8)
        codes = make_spreading_codes(2, 8, seed=7)
        coop = CooperativeConfig(n_relays=2, source_gains=(0.9, 1.1), relay_gains=(0.8, 1.2))
        rng = np.random.default_rng(1)
        h1 = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        h2 = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        b = [1.0, -1.0]
        r = cooperative_received_vector(coop, cfg, h1, h2, codes, b)
        expected = np.zeros(8, dtype=complex)
        for n in range(2):
            for k in range(2):
                expected += coop.source_gains[k] * coop.relay_gains[n] * h1[k, n] * h2[n] * codes[k] * b[k]
        np.testing.assert_allclose(r, expected)

    def test_bad_hop_shape(self):
        cfg = SystemConfig(K=2, N=8)
        with pytest.raises(ValueError):
            cooperative_received_vector(CooperativeConfig(2), cfg, [1.0] * 3, [1.0] * 2, make_spreading_codes(2, 8), [1.0, 1.0])


class TestGeneratePacket:
    def test_shapes_and_reconstruction(self):
        cfg = SystemConfig(K=3, N=8, L_p=2, n_symbols=40, training_len=10, snr_db=200)
        pk = generate_packet(cfg, 0.01, np.random.default_rng(0))
        assert pk.received.shape == (40, 9)
        assert pk.interference.shape == (40, 9, 2 + 3)
        # noise-free: received = desired * b + sum of interferers with their own symbols
        sym = pk.symbols
        rebuilt = sym[0][:, None] * pk.desired
        rebuilt += np.einsum("kn,nmk->nm", sym[1:], pk.interference[:, :, :2])
        rebuilt[1:] += np.einsum("kn,nmk->nm", sym[:, :-1], pk.interference[1:, :, 2:])
        np.testing.assert_allclose(pk.received, rebuilt, atol=1e-8)

    def test_cooperative_noise_variance(self):
        cfg = SystemConfig(K=2, N=8, n_symbols=20, training_len=5)
        pk = generate_packet(cfg, 0.01, np.random.default_rng(0), coop=CooperativeConfig(2))
        assert np.all(pk.noise_var > cfg.noise_power)

    def test_window(self):
        cfg = SystemConfig(K=1, N=4, n_symbols=5, training_len=0)
        pk = generate_packet(cfg, 0.01, 0)
        w = pk.window(3)
        assert isinstance(w, ReceivedWindow)
        np.testing.assert_array_equal(w.r_prev2, pk.received[1])
        with pytest.raises(ValueError):
            pk.window(1)


class TestSystemConfig:
    def test_observation_length(self):
        assert SystemConfig(N=16, L_p=3).M == 18

    @pytest.mark.parametrize("kwargs", [dict(K=0), dict(L_p=16), dict(amplitudes=(1.0,)), dict(N=0)])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            SystemConfig(**kwargs)

    @settings(max_examples=20)
    @given(st.floats(-10, 30))
    def test_noise_power(self, snr):
        assert np.isclose(SystemConfig(snr_db=snr).noise_power, 10 ** (-snr / 10))
