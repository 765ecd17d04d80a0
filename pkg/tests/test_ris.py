"""Tests for RIS configuration and cascaded-channel assembly."""

import numpy as np
import pytest

from rislink.mathkit import RngStream
from rislink.ris import RisConfig, cascaded_channel, quantize_config, random_config


class TestRandomConfig:
    def test_per_frame_constant(self):
        cfg = random_config(8, 5, RngStream(1), per_frame=True)
        assert cfg.psi.shape == (5, 8)
        assert np.array_equal(cfg.psi[0], cfg.psi[4])

    def test_per_symbol_varies(self):
        cfg = random_config(8, 5, RngStream(1), per_frame=False)
        assert not np.array_equal(cfg.psi[0], cfg.psi[1])

    def test_uniform_phase_mean(self):
        cfg = random_config(1_000_000, 1, RngStream(2))
        assert abs(np.exp(1j * cfg.psi).mean()) < 0.01

    def test_determinism(self):
        a = random_config(16, 3, RngStream(5, 7))
        b = random_config(16, 3, RngStream(5, 7))
        assert np.array_equal(a.psi, b.psi)

    def test_validation(self):
        with pytest.raises(ValueError):
            random_config(0, 1, RngStream(1))


class TestQuantizeConfig:
    def test_one_bit_values(self):
        cfg = RisConfig(psi=np.array([[0.1, 3.0]]))
        q = quantize_config(cfg, 1)
        assert q.psi[0, 0] == 0.0
        assert q.psi[0, 1] == pytest.approx(np.pi)
        assert q.bits == 1

    def test_tie_breaks_to_smaller_level(self):
        cfg = RisConfig(psi=np.array([[np.pi / 2]]))
        assert quantize_config(cfg, 1).psi[0, 0] == 0.0

    def test_idempotence(self):
        cfg = random_config(32, 2, RngStream(3))
        q1 = quantize_config(cfg, 1)
        q2 = quantize_config(q1, 1)
        assert np.array_equal(q1.psi, q2.psi)

    def test_levels_and_unit_modulus(self):
        cfg = random_config(64, 1, RngStream(4))
        q = quantize_config(cfg, 3)
        step = 2 * np.pi / 8
        assert np.allclose(np.mod(q.psi, step), 0.0)
        assert np.allclose(np.abs(np.exp(1j * q.psi)), 1.0)
        assert q.psi.shape == cfg.psi.shape

    def test_bits_bounds(self):
        cfg = random_config(4, 1, RngStream(5))
        with pytest.raises(ValueError):
            quantize_config(cfg, 0)
        with pytest.raises(ValueError):
            quantize_config(cfg, 17)


class TestCascadedChannel:
    def test_single_element(self):
        H = np.array([[1 + 2j], [0.5 - 1j]])
        g = np.array([2.0 + 0j])
        q = cascaded_channel(H, g, np.array([0.0]))
        assert np.allclose(q, H[:, 0] * g[0])

    def test_global_phase_invariance(self):
        rng = np.random.default_rng(6)
        H = rng.normal(size=(4, 8)) + 1j * rng.normal(size=(4, 8))
        g = rng.normal(size=8) + 1j * rng.normal(size=8)
        psi = rng.uniform(0, 2 * np.pi, 8)
        q0 = cascaded_channel(H, g, psi)
        q1 = cascaded_channel(H, g, psi + 0.77)
        assert np.allclose(q1, np.exp(1j * 0.77) * q0)
        assert np.linalg.norm(q1) == pytest.approx(np.linalg.norm(q0))

    def test_sum_form_equals_matrix_form(self):
        rng = np.random.default_rng(7)
        H = rng.normal(size=(4, 8)) + 1j * rng.normal(size=(4, 8))
        g = rng.normal(size=8) + 1j * rng.normal(size=8)
        psi = rng.uniform(0, 2 * np.pi, 8)
        q_sum = sum(np.exp(1j * psi[m]) * H[:, m] * g[m] for m in range(8))
        q_mat = H @ np.diag(np.exp(1j * psi)) @ g
        q = cascaded_channel(H, g, psi)
        assert np.abs(q - q_sum).max() < 1e-12
        assert np.abs(q - q_mat).max() < 1e-12

    def test_linearity_in_g(self):
        rng = np.random.default_rng(8)
        H = rng.normal(size=(3, 5)) + 1j * rng.normal(size=(3, 5))
        g1 = rng.normal(size=5) + 1j * rng.normal(size=5)
        g2 = rng.normal(size=5) + 1j * rng.normal(size=5)
        psi = rng.uniform(0, 2 * np.pi, 5)
        lhs = cascaded_channel(H, 2.0 * g1 + 3j * g2, psi)
        rhs = 2.0 * cascaded_channel(H, g1, psi) + 3j * cascaded_channel(H, g2, psi)
        assert np.allclose(lhs, rhs)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            cascaded_channel(np.ones((2, 3)), np.ones(4), np.zeros(3))
