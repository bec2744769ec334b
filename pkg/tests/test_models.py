import sys
import unittest
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1]
SRC = ROOT / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from uw_otfs_sim.errors import ConfigurationError, DimensionError
from uw_otfs_sim.models import (
    BemConfig,
    ChannelRealization,
    CsiMode,
    PilotConfig,
    PilotKind,
    ResultRow,
    SimulationPlan,
    SystemVariant,
)


class EnumParsingTests(unittest.TestCase):
    def test_pilot_kind_aliases(self) -> None:
        self.assertIs(PilotKind.parse("uw"), PilotKind.CHIRPED_DIRICHLET_UW)
        self.assertIs(PilotKind.parse(" Chirped "), PilotKind.CHIRPED_DIRICHLET_UW)
        self.assertIs(PilotKind.parse("impulse"), PilotKind.EMBEDDED_IMPULSE)
        self.assertIs(PilotKind.parse("dirac"), PilotKind.DIRAC_UW)
        self.assertIs(PilotKind.parse(""), PilotKind.NONE)
        self.assertTrue(PilotKind.DIRAC_UW.is_uw)
        self.assertFalse(PilotKind.EMBEDDED_IMPULSE.is_uw)
        with self.assertRaises(ConfigurationError):
            PilotKind.parse("zadoff-chu")

    def test_csi_and_variant(self) -> None:
        self.assertIs(CsiMode.parse(None), CsiMode.ESTIMATED)
        self.assertIs(CsiMode.parse("PERFECT"), CsiMode.PERFECT)
        self.assertIs(SystemVariant.parse("cp"), SystemVariant.CP)
        with self.assertRaises(ConfigurationError):
            SystemVariant.parse("ofdm")
        with self.assertRaises(ConfigurationError):
            CsiMode.parse("genie")


class PilotConfigTests(unittest.TestCase):
    def test_roundtrip_preserves_fields(self) -> None:
        config = PilotConfig(PilotKind.EMBEDDED_IMPULSE, sigma_u_sq=0.5, rho0_sq=2.5, p0=4, q0=7, M0=144)
        restored = PilotConfig.from_dict(config.to_dict())
        self.assertEqual(restored, config)
        self.assertAlmostEqual(restored.amplitude, np.sqrt(2.5 * 144))


class BemConfigTests(unittest.TestCase):
    def test_doppler_offsets_are_centered(self) -> None:
        np.testing.assert_allclose(BemConfig(3.0, 4).V, [-1.5, -0.5, 0.5, 1.5])
        np.testing.assert_allclose(BemConfig(3.0, 3).V, [-1.0, 0.0, 1.0])

    def test_rejects_non_positive_rate(self) -> None:
        with self.assertRaises(ConfigurationError):
            BemConfig(0.0, 16)


class ChannelRealizationTests(unittest.TestCase):
    def test_single_path(self) -> None:
        channel = ChannelRealization.single_path(gain=2.0, delay=3, doppler=0.25)
        self.assertEqual(channel.P, 1)
        self.assertEqual(list(channel.paths()), [(2.0 + 0j, 3, 0.25)])

    def test_length_mismatch(self) -> None:
        with self.assertRaises(DimensionError):
            ChannelRealization(np.array([0, 1]), np.array([0.0]), np.array([1.0 + 0j]))


class ResultRowTests(unittest.TestCase):
    def test_roundtrip(self) -> None:
        row = ResultRow("UW", 10.0, 400.0, 4, 1e-3, float("-inf"), 7, 0.0)
        restored = ResultRow.from_dict(row.to_dict())
        self.assertEqual(restored, row)


class SimulationPlanTests(unittest.TestCase):
    def test_validation(self) -> None:
        with self.assertRaises(ConfigurationError):
            SimulationPlan("UW", ())
        with self.assertRaises(ConfigurationError):
            SimulationPlan("UW", (10.0,), realizations=0)
        with self.assertRaises(ConfigurationError):
            SimulationPlan("UW", (10.0,), metrics=("BER", "EVM"))

    def test_to_dict_excludes_worker_count(self) -> None:
        a = SimulationPlan("UW", (0.0, 10.0), workers=1)
        b = SimulationPlan("UW", (0.0, 10.0), workers=4)
        self.assertNotIn("workers", a.to_dict())
        self.assertEqual(a.to_dict(), b.to_dict())
        self.assertEqual(a.to_dict()["pilot_kind"], "uw")


if __name__ == "__main__":
    unittest.main()
