import sys
import unittest
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1]
SRC = ROOT / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from uw_otfs_sim.analysis import energy_profile
from uw_otfs_sim.channel import apply_gce_bem, apply_ltv, on_grid_doppler
from uw_otfs_sim.detection import QamMapping, bin_indices, demap
from uw_otfs_sim.errors import BoundsError, ConfigurationError
from uw_otfs_sim.models import BemConfig, ChannelRealization, CsiMode, GceBemChannel, PilotConfig, PilotKind
from uw_otfs_sim.numerics import isft, unvectorize, vectorize
from uw_otfs_sim.numerology import Numerology, pilot_config, preset
from uw_otfs_sim.uw_otfs import (
    UwOtfsModem,
    build_precoder,
    build_uw_ce_operator,
    build_uw_ecm_tensors,
    estimate_bem_uw,
    estimated_pilot_response,
    extract_ce,
    perfect_ecm_uw,
    perfect_ecms_uw,
    reconstruct_ecm_uw,
    rx_pipeline_uw,
    tx_data_frame,
    uw_pilot,
    wigner_uw,
)


def small_uw() -> Numerology:
    return Numerology.derive("uw", M=8, N=4, Q=2, delta_f=26e3, tau_m=2 / (16 * 26e3))


def random_complex(rng: np.random.Generator, *shape: int) -> np.ndarray:
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def observable_projector(A: np.ndarray, ratio: float = 1e-6) -> np.ndarray:
    """Projector onto the coefficient directions A observes with energy >= ratio * largest."""
    _, s, Vh = np.linalg.svd(A)
    V = Vh[s**2 >= ratio * s[0] ** 2].conj().T
    return V @ V.conj().T


class SmallNumerologyTests(unittest.TestCase):
    def test_dimensions(self) -> None:
        n = small_uw()
        self.assertEqual((n.M_prime, n.L_prime, n.M_gi, n.M_s, n.M_h, n.k_h), (16, 3, 5, 13, 3, 13))


class PrecoderTests(unittest.TestCase):
    def test_null_space_and_scaling(self) -> None:
        n = small_uw()
        pre = build_precoder(n, sigma_u_sq=0.5)
        self.assertEqual(pre.G.shape, (13, 8))
        np.testing.assert_array_equal(pre.active, bin_indices(16, 13))
        np.testing.assert_allclose(pre.G.conj().T @ pre.G, np.eye(8), atol=1e-10)
        self.assertAlmostEqual(pre.alpha_d**2 * 8, 16 * 0.5)
        self.assertEqual(pre.B.shape, (16, 13))

    def test_data_block_is_silent_in_guard(self) -> None:
        n = small_uw()
        pre = build_precoder(n, sigma_u_sq=0.5)
        S = tx_data_frame(random_complex(np.random.default_rng(51), n.M, n.N), pre, n)
        K = n.M_prime - n.M_gi
        self.assertLess(float(np.max(np.abs(S[K:, :]))), 1e-12)
        self.assertGreater(float(np.min(np.abs(S[:K, :]).max(axis=0))), 1e-3)

    def test_rejects_cp_numerology(self) -> None:
        with self.assertRaises(ConfigurationError):
            build_precoder(preset("CP*"))


class PilotTests(unittest.TestCase):
    def test_chirp_keeps_dirichlet_magnitude(self) -> None:
        n = small_uw()
        pilot = uw_pilot(n, PilotKind.CHIRPED_DIRICHLET_UW, 0.5)
        np.testing.assert_allclose(np.abs(pilot.c), np.abs(pilot.c0), atol=1e-12)
        self.assertAlmostEqual(float(np.mean(np.abs(pilot.c0[: n.M_prime]) ** 2)), 1.0)
        self.assertEqual(int(np.argmax(np.abs(pilot.c0[: n.M_prime]))), n.k_h)
        np.testing.assert_allclose(pilot.stream(), np.sqrt(0.5) * pilot.c)

    def test_dirac_pilot(self) -> None:
        n = small_uw()
        c = uw_pilot(n, PilotKind.DIRAC_UW, 0.5).c
        np.testing.assert_array_equal(np.flatnonzero(c), n.k_h + n.M_prime * np.arange(n.N))
        self.assertAlmostEqual(abs(c[n.k_h]), 4.0)

    def test_no_pilot(self) -> None:
        pilot = uw_pilot(small_uw(), PilotKind.NONE)
        self.assertEqual(pilot.sigma_u_sq, 0.0)
        self.assertFalse(np.any(pilot.stream()))
        with self.assertRaises(ConfigurationError):
            uw_pilot(small_uw(), PilotKind.EMBEDDED_IMPULSE)

    def test_chirped_energy_share_inside_guard(self) -> None:
        n = preset("UW")
        profile = energy_profile(uw_pilot(n, PilotKind.CHIRPED_DIRICHLET_UW).c, n.M_prime)
        fraction = profile[n.M_prime - n.M_gi :].sum() / profile.sum()
        self.assertAlmostEqual(float(fraction), 0.967, delta=0.002)


class CeObservationTests(unittest.TestCase):
    def setUp(self) -> None:
        self.n = small_uw()
        self.modem = UwOtfsModem(self.n, pilot_config(self.n, PilotKind.CHIRPED_DIRICHLET_UW, 0.5))
        self.rng = np.random.default_rng(52)

    def test_extract_shape_and_bounds(self) -> None:
        Y_ce = extract_ce(np.arange(self.n.frame_length, dtype=complex), self.n)
        self.assertEqual(Y_ce.shape, (self.n.M_h, self.n.N))
        self.assertEqual(Y_ce[0, 1], self.n.M_prime + self.n.k_h)
        with self.assertRaises(BoundsError):
            extract_ce(np.zeros(10), self.n)

    def test_data_does_not_reach_ce_samples(self) -> None:
        for dopplers in (np.zeros(3), np.array([0.2, -0.45, 0.05])):
            channel = ChannelRealization(np.array([0, 1, 2]), dopplers, random_complex(self.rng, 3))
            symbols = random_complex(self.rng, self.n.M * self.n.N)
            full = extract_ce(apply_ltv(self.modem.transmit(symbols), channel, self.n.M_prime), self.n)
            pilot = extract_ce(apply_ltv(self.modem.pilot_stream(), channel, self.n.M_prime), self.n)
            np.testing.assert_allclose(full, pilot, atol=1e-12)


class EffectiveChannelTests(unittest.TestCase):
    def test_ecm_reproduces_received_blocks(self) -> None:
        n = small_uw()
        rng = np.random.default_rng(53)
        pre = build_precoder(n, 0.5)
        D = random_complex(rng, n.M, n.N)
        channel = ChannelRealization(np.array([0, 1, 2]), np.array([0.3, -0.7, 0.05]), random_complex(rng, 3))
        S = tx_data_frame(D, pre, n)
        Y = wigner_uw(apply_ltv(S.reshape(-1, order="F"), channel, n.M_prime), n)
        X = isft(D)
        stacked = perfect_ecms_uw(channel, pre, n)
        for block in range(n.N):
            ecm = perfect_ecm_uw(channel, pre, n, block)
            np.testing.assert_allclose(Y[:, block], ecm @ X[:, block], atol=1e-9)
            np.testing.assert_allclose(stacked[block], ecm, atol=1e-12)


class ChannelEstimationTests(unittest.TestCase):
    def setUp(self) -> None:
        self.n = small_uw()
        self.bem = BemConfig(1.0, self.n.N)

    def _observe(self, pilot, H_ce: np.ndarray) -> np.ndarray:
        r = apply_gce_bem(pilot.stream(), GceBemChannel(H_ce, self.bem.n_nu, self.n.M_prime), self.n.N, self.n.M_h)
        return extract_ce(r, self.n)

    def test_operator_columns_match_propagated_pilot(self) -> None:
        pilot = uw_pilot(self.n, PilotKind.CHIRPED_DIRICHLET_UW, 0.5)
        op = build_uw_ce_operator(self.n, pilot, self.bem)
        self.assertEqual(op.A_ce.shape, (self.n.M_h * self.n.N, self.n.M_h * self.n.N))
        for delay, kv in [(0, 0), (1, 3), (2, 1)]:
            H_ce = np.zeros((self.n.M_h, self.n.N), dtype=complex)
            H_ce[delay, kv] = 1.0
            with self.subTest(delay=delay, kv=kv):
                np.testing.assert_allclose(
                    vectorize(self._observe(pilot, H_ce)), op.A_ce[:, delay + self.n.M_h * kv], atol=1e-10
                )

    def test_dirac_pilot_recovers_coefficients(self) -> None:
        pilot = uw_pilot(self.n, PilotKind.DIRAC_UW, 0.5)
        op = build_uw_ce_operator(self.n, pilot, self.bem)
        H_true = random_complex(np.random.default_rng(54), self.n.M_h, self.n.N)
        H_est = estimate_bem_uw(self._observe(pilot, H_true), op, 0.0)
        self.assertLess(np.linalg.norm(H_est - H_true) / np.linalg.norm(H_true), 1e-6)

    def test_chirped_pilot_recovers_coefficients(self) -> None:
        pilot = uw_pilot(self.n, PilotKind.CHIRPED_DIRICHLET_UW, 0.5)
        op = build_uw_ce_operator(self.n, pilot, self.bem)
        H_true = random_complex(np.random.default_rng(55), self.n.M_h, self.n.N)
        y = vectorize(self._observe(pilot, H_true))
        H_est = op.estimate(unvectorize(y, self.n.M_h, self.n.N), 0.0)

        residual = op.A_ce @ vectorize(H_est) - y
        self.assertLess(np.linalg.norm(residual) / np.linalg.norm(y), 1e-3)
        observable = observable_projector(op.A_ce)
        error = observable @ (vectorize(H_est) - vectorize(H_true))
        self.assertLess(np.linalg.norm(error) / np.linalg.norm(observable @ vectorize(H_true)), 1e-3)

    def test_estimated_pilot_response_matches_channel_output(self) -> None:
        pilot = uw_pilot(self.n, PilotKind.DIRAC_UW, 0.5)
        op = build_uw_ce_operator(self.n, pilot, self.bem)
        H_true = random_complex(np.random.default_rng(57), self.n.M_h, self.n.N)
        H_est = estimate_bem_uw(self._observe(pilot, H_true), op, 0.0)
        expected = apply_gce_bem(
            pilot.stream(), GceBemChannel(H_true, self.bem.n_nu, self.n.M_prime), self.n.N, self.n.M_h
        )
        response = estimated_pilot_response(pilot, H_est, self.n, self.bem)
        self.assertLess(np.linalg.norm(response - expected) / np.linalg.norm(expected), 1e-5)

    def test_requires_pilot_energy(self) -> None:
        with self.assertRaises(ConfigurationError):
            build_uw_ce_operator(self.n, uw_pilot(self.n, PilotKind.NONE), self.bem)

    def test_reconstructed_ecm_matches_on_grid_path(self) -> None:
        pre = build_precoder(self.n, 0.5)
        tensors = build_uw_ecm_tensors(self.n, pre, self.bem)
        rows = bin_indices(self.n.M_prime, self.n.M_b)
        V = self.bem.V
        for delay, kv in [(0, 2), (2, 0)]:
            H_ce = np.zeros((self.n.M_h, self.n.N), dtype=complex)
            H_ce[delay, kv] = 1.0
            path = ChannelRealization.single_path(
                delay=delay,
                doppler=on_grid_doppler(V[kv], self.bem.n_nu, self.n.N, self.n.M_prime, self.n.M_prime),
            )
            for block in range(self.n.N):
                with self.subTest(delay=delay, kv=kv, block=block):
                    np.testing.assert_allclose(
                        reconstruct_ecm_uw(H_ce, pre, self.n, self.bem, block, tensors),
                        perfect_ecm_uw(path, pre, self.n, block)[rows],
                        atol=1e-10,
                    )


class UwModemTests(unittest.TestCase):
    def setUp(self) -> None:
        self.n = small_uw()
        self.mapping = QamMapping.for_order(4)
        rng = np.random.default_rng(56)
        self.bits = rng.integers(0, 2, size=self.n.M * self.n.N * self.mapping.bits_per_symbol)
        self.symbols = self.mapping.map(self.bits)
        self.channel = ChannelRealization(np.array([0, 2]), np.array([0.12, -0.4]), np.array([1.0 + 0j, 0.4 - 0.3j]))

    def test_layout(self) -> None:
        modem = UwOtfsModem(self.n, pilot_config(self.n, PilotKind.DIRAC_UW, 0.5))
        self.assertTrue(modem.data_mask.all())
        self.assertEqual(modem.block_length, self.n.M_prime)
        np.testing.assert_allclose(
            modem.transmit(self.symbols), modem.transmit_data(self.symbols) + modem.pilot_stream()
        )
        with self.assertRaises(ConfigurationError):
            UwOtfsModem(preset("CP*"), PilotConfig(PilotKind.NONE))

    def test_perfect_csi_without_pilot(self) -> None:
        modem = UwOtfsModem(self.n, pilot_config(self.n, PilotKind.NONE))
        r = apply_ltv(modem.transmit(self.symbols), self.channel, self.n.M_prime)
        output = modem.receive(r, 0.0, CsiMode.PERFECT, channel=self.channel)
        np.testing.assert_array_equal(demap(output.symbols, self.mapping, modem.data_mask), self.bits)
        np.testing.assert_allclose(output.symbols.reshape(-1), self.symbols, atol=1e-8)

    def test_perfect_csi_with_pilot_cancellation(self) -> None:
        modem = UwOtfsModem(self.n, pilot_config(self.n, PilotKind.CHIRPED_DIRICHLET_UW, 0.5))
        r = apply_ltv(modem.transmit(self.symbols), self.channel, self.n.M_prime)
        interference = apply_ltv(modem.pilot_stream(), self.channel, self.n.M_prime)
        output = modem.receive(r, 0.0, CsiMode.PERFECT, channel=self.channel, pilot_interference=interference)
        np.testing.assert_allclose(output.symbols.reshape(-1), self.symbols, atol=1e-8)

    def test_estimated_csi_pipeline(self) -> None:
        modem = UwOtfsModem(self.n, pilot_config(self.n, PilotKind.CHIRPED_DIRICHLET_UW, 0.5), BemConfig(1.0, 4))
        r = apply_ltv(modem.transmit(self.symbols), self.channel, self.n.M_prime)
        output = modem.receive(r, 0.01, CsiMode.ESTIMATED)
        self.assertIsNotNone(modem.operator)
        self.assertEqual(output.H_ce.shape, (self.n.M_h, self.n.N))
        self.assertEqual(output.ecms.matrices.shape, (self.n.N, self.n.M_b, self.n.M))
        self.assertEqual(modem.perfect_ecms(self.channel).matrices.shape, output.ecms.matrices.shape)

    def _bem_frame(self, modem: UwOtfsModem, H_ce: np.ndarray) -> np.ndarray:
        channel = GceBemChannel(H_ce, modem.bem.n_nu, self.n.M_prime)
        return apply_gce_bem(modem.transmit(self.symbols), channel, self.n.N, self.n.M_h)

    def test_estimated_csi_removes_dirac_pilot(self) -> None:
        modem = UwOtfsModem(self.n, pilot_config(self.n, PilotKind.DIRAC_UW, 0.5), BemConfig(1.0, 4))
        H_true = random_complex(np.random.default_rng(58), self.n.M_h, self.n.N)
        output = modem.receive(self._bem_frame(modem, H_true), 0.0, CsiMode.ESTIMATED)
        np.testing.assert_array_equal(demap(output.symbols, self.mapping, modem.data_mask), self.bits)
        np.testing.assert_allclose(output.symbols.reshape(-1), self.symbols, atol=1e-4)

    def test_estimated_csi_removes_chirped_pilot(self) -> None:
        bem = BemConfig(1.0, 4)
        modem = UwOtfsModem(self.n, pilot_config(self.n, PilotKind.CHIRPED_DIRICHLET_UW, 0.5), bem)
        op = modem.build_operator()
        observable = observable_projector(op.A_ce)
        h = observable @ vectorize(random_complex(np.random.default_rng(59), self.n.M_h, self.n.N))
        r = self._bem_frame(modem, unvectorize(h, self.n.M_h, self.n.N))

        kept = rx_pipeline_uw(r, op, modem.precoder, self.n, bem, 0.0, CsiMode.ESTIMATED, tensors=modem.tensors)
        self.assertGreater(float(np.max(np.abs(kept.symbols.reshape(-1) - self.symbols))), 1e-3)

        output = modem.receive(r, 0.0, CsiMode.ESTIMATED)
        np.testing.assert_array_equal(demap(output.symbols, self.mapping, modem.data_mask), self.bits)
        np.testing.assert_allclose(output.symbols.reshape(-1), self.symbols, atol=1e-4)

    def test_pipeline_builds_missing_tensors(self) -> None:
        bem = BemConfig(1.0, 4)
        modem = UwOtfsModem(self.n, pilot_config(self.n, PilotKind.CHIRPED_DIRICHLET_UW, 0.5), bem)
        r = apply_ltv(modem.transmit(self.symbols), self.channel, self.n.M_prime)
        expected = modem.receive(r, 0.01, CsiMode.ESTIMATED)
        output = rx_pipeline_uw(
            r, modem.operator, modem.precoder, self.n, bem, 0.01, CsiMode.ESTIMATED, pilot=modem.pilot
        )
        np.testing.assert_allclose(output.H_ce, expected.H_ce, atol=1e-10)
        np.testing.assert_allclose(output.symbols, expected.symbols, atol=1e-8)
        with self.assertRaises(ConfigurationError):
            rx_pipeline_uw(r, None, modem.precoder, self.n, None, 0.01, CsiMode.PERFECT)


if __name__ == "__main__":
    unittest.main()
