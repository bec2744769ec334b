import sys
import unittest
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1]
SRC = ROOT / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from uw_otfs_sim.channel import (
    add_awgn,
    apply_gce_bem,
    apply_ltv,
    awgn_variance,
    bits_per_sample,
    on_grid_doppler,
    received_power,
    sample_channel,
)
from uw_otfs_sim.errors import ConfigurationError, DimensionError
from uw_otfs_sim.models import BemConfig, ChannelRealization, GceBemChannel
from uw_otfs_sim.numerology import preset


class SampleChannelTests(unittest.TestCase):
    def test_paths_stay_within_support(self) -> None:
        rng = np.random.default_rng(11)
        channel = sample_channel(rng, 200, 9, 3706.0, 26e3)
        self.assertEqual(channel.P, 200)
        self.assertTrue(np.all((channel.delays >= 0) & (channel.delays < 9)))
        self.assertTrue(np.all(np.abs(channel.dopplers) <= 3706.0 / 26e3 + 1e-12))

    def test_seeded_draws_repeat(self) -> None:
        a = sample_channel(np.random.default_rng(5), 16, 9, 3706.0, 26e3)
        b = sample_channel(np.random.default_rng(5), 16, 9, 3706.0, 26e3)
        np.testing.assert_array_equal(a.gains, b.gains)
        np.testing.assert_array_equal(a.delays, b.delays)

    def test_rejects_empty_channel(self) -> None:
        with self.assertRaises(ConfigurationError):
            sample_channel(np.random.default_rng(0), 0, 9, 1.0, 1.0)


class ApplyChannelTests(unittest.TestCase):
    def test_pure_delay(self) -> None:
        s = np.arange(1, 9, dtype=complex)
        r = apply_ltv(s, ChannelRealization.single_path(delay=2), 16)
        np.testing.assert_allclose(r, [0, 0, 1, 2, 3, 4, 5, 6])

    def test_doppler_rotates_each_sample(self) -> None:
        s = np.ones(16, dtype=complex)
        r = apply_ltv(s, ChannelRealization.single_path(gain=0.5, doppler=1.0), 16)
        np.testing.assert_allclose(r, 0.5 * np.exp(2j * np.pi * np.arange(16) / 16), atol=1e-12)

    def test_unit_bem_coefficient_is_an_on_grid_path(self) -> None:
        rng = np.random.default_rng(12)
        M_prime, M_x_prime, N, n_nu = 16, 18, 3, 2.0
        s = rng.standard_normal(N * M_x_prime) + 1j * rng.standard_normal(N * M_x_prime)
        V = BemConfig(n_nu, N).V
        for delay, kv in [(0, 0), (1, 1), (2, 2)]:
            H_ce = np.zeros((3, N), dtype=complex)
            H_ce[delay, kv] = 1.0
            bem = GceBemChannel(H_ce, n_nu, M_x_prime)
            path = ChannelRealization.single_path(
                delay=delay,
                doppler=on_grid_doppler(V[kv], n_nu, N, M_x_prime, M_prime),
            )
            with self.subTest(delay=delay, kv=kv):
                np.testing.assert_allclose(apply_gce_bem(s, bem, N, 3), apply_ltv(s, path, M_prime), atol=1e-10)

    def test_gce_bem_matches_double_sum(self) -> None:
        rng = np.random.default_rng(13)
        M_h, N, n_nu, M_x_prime = 3, 4, 1.5, 8
        H_ce = rng.standard_normal((M_h, N)) + 1j * rng.standard_normal((M_h, N))
        s = rng.standard_normal(32) + 1j * rng.standard_normal(32)
        V = np.arange(N) - (N - 1) / 2.0

        expected = np.zeros(32, dtype=complex)
        for k in range(32):
            for delay in range(M_h):
                if k - delay < 0:
                    continue
                for kv in range(N):
                    phase = np.exp(2j * np.pi * V[kv] * k / (n_nu * N * M_x_prime))
                    expected[k] += s[k - delay] * H_ce[delay, kv] * phase

        r = apply_gce_bem(s, GceBemChannel(H_ce, n_nu, M_x_prime), N, M_h)
        np.testing.assert_allclose(r, expected, atol=1e-12)

    def test_gce_bem_identity_and_zero(self) -> None:
        s = np.arange(1, 17, dtype=complex)
        identity = np.zeros((2, 3), dtype=complex)
        identity[0, 1] = 1.0
        np.testing.assert_allclose(apply_gce_bem(s, GceBemChannel(identity, 2.0, 16), 3, 2), s, atol=1e-12)
        silent = GceBemChannel(np.zeros((2, 3), dtype=complex), 2.0, 16)
        np.testing.assert_array_equal(apply_gce_bem(s, silent, 3, 2), np.zeros(16))

    def test_gce_bem_rejects_mismatched_shape(self) -> None:
        bem = GceBemChannel(np.ones((2, 3), dtype=complex), 1.0, 16)
        with self.assertRaises(DimensionError):
            apply_gce_bem(np.ones(16), bem, 4, 2)


class NoiseTests(unittest.TestCase):
    def test_awgn_variance(self) -> None:
        self.assertEqual(awgn_variance(1.0, 1.0, float("inf")), 0.0)
        self.assertAlmostEqual(awgn_variance(2.0, 0.5, 10.0), 0.4)
        with self.assertRaises(ConfigurationError):
            awgn_variance(0.0, 1.0, 10.0)

    def test_noise_power(self) -> None:
        rng = np.random.default_rng(13)
        r = add_awgn(rng, np.zeros(200_000, dtype=complex), 0.25)
        self.assertAlmostEqual(float(np.mean(np.abs(r) ** 2)), 0.25, delta=0.25 * 0.02)

    def test_zero_noise_copies(self) -> None:
        s = np.ones(4, dtype=complex)
        r = add_awgn(np.random.default_rng(0), s, 0.0)
        np.testing.assert_array_equal(r, s)
        self.assertIsNot(r, s)
        with self.assertRaises(DimensionError):
            add_awgn(np.random.default_rng(0), s, -1.0)

    def test_received_power_removes_noise(self) -> None:
        n = preset("UW")
        r = np.full(n.frame_length + 7, 2.0, dtype=complex)
        r[n.frame_length :] = 100.0
        self.assertAlmostEqual(received_power(r, n, 1.0), 3.0)
        self.assertEqual(received_power(r, n, 10.0), 0.0)

    def test_bits_per_sample(self) -> None:
        self.assertAlmostEqual(bits_per_sample(preset("UW")), 1.0)
        self.assertAlmostEqual(bits_per_sample(preset("CP*")), 0.71875)


if __name__ == "__main__":
    unittest.main()
