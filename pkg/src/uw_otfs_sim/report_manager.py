from __future__ import annotations

from typing import TYPE_CHECKING, Any, Sequence

import numpy as np

from .analysis import (
    PaprAccumulator,
    PsdAccumulator,
    count_leaky_bins,
    energy_profile,
    format_table,
    leakage_profile,
    papr_at_probability,
)
from .complexity import complexity
from .cp_otfs import CpOtfsModem
from .detection import QamMapping
from .models import PilotKind
from .numerology import Numerology, pilot_config, preset, presets, spectral_efficiency
from .uw_otfs import UwOtfsModem

if TYPE_CHECKING:
    from . import OtfsSimulatorApp


class ReportManager:
    def __init__(self, app: "OtfsSimulatorApp") -> None:
        self.app = app

    def numerology_report(self, v_max: float) -> str:
        lines = [f"{'system':<8}{'BW [MHz]':>10}{'T_tx [ms]':>11}{'R_s [MBd]':>11}{'eta':>8}{'M_s':>6}{'M_h':>6}"]
        for name, n in presets(v_max).items():
            se = spectral_efficiency(n)
            lines.append(
                f"{name:<8}{se.BW / 1e6:>10.3f}{se.T_tx * 1e3:>11.4f}{se.R_s / 1e6:>11.4f}"
                f"{se.eta:>8.3f}{n.M_s:>6}{n.M_h:>6}"
            )
        return "\n".join(lines)

    def complexity_report(self, system: str | None, uw_detection_bins: int) -> str:
        names = [system.upper()] if system else list(presets())
        reports = []
        for name in names:
            n = preset(name)
            reports.append(complexity(n, detection_bins=None if n.is_cp else uw_detection_bins))

        header = f"{'row':<12}" + "".join(f"{report.system:>14}" for report in reports)
        lines = ["Complex multiplications", header]
        for index, (label, _) in enumerate(reports[0].computation_rows()):
            lines.append(f"{label:<12}" + "".join(f"{report.computation_rows()[index][1]:>14,}" for report in reports))
        lines += ["", "Memory [complex samples]", header]
        for index, (label, _) in enumerate(reports[0].memory_rows()):
            lines.append(f"{label:<12}" + "".join(f"{report.memory_rows()[index][1]:>14,}" for report in reports))
        return "\n".join(lines)

    def leakage_report(self, M: int, Q: int, p0: int, k_tau: int, alphas: Sequence[float]) -> str:
        sections = []
        for alpha in alphas:
            profile = leakage_profile(M, Q, alpha, p0, k_tau)
            sections.append(
                f"# alpha={alpha:g} M_alpha={profile.M_alpha} leaky_bins={count_leaky_bins(profile)}\n"
                + format_table(np.arange(M), profile.energy_db, ("delay_bin", "energy_db"))
            )
        return "\n\n".join(sections)

    def _modem(self, n: Numerology, kind: PilotKind, sigma_u_sq: float) -> CpOtfsModem | UwOtfsModem:
        pilot = pilot_config(n, kind, sigma_u_sq)
        return CpOtfsModem(n, pilot) if n.is_cp else UwOtfsModem(n, pilot)

    def _frames(self, modem: CpOtfsModem | UwOtfsModem, frames: int, seed: int, data: bool):
        mapping = QamMapping.for_order(2 ** modem.numerology.k_b)
        count = int(modem.data_mask.sum())
        for index in range(frames):
            if not data:
                yield modem.pilot_stream()
                continue
            rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
            bits = rng.integers(0, 2, size=count * mapping.bits_per_symbol)
            yield modem.transmit(mapping.map(bits))

    def psd_report(
        self,
        system: str,
        kind: PilotKind,
        sigma_u_sq: float,
        frames: int,
        seed: int,
        pilot_only: bool = False,
    ) -> str:
        n = preset(system)
        modem = self._modem(n, kind, sigma_u_sq)
        accumulator = PsdAccumulator(seg_len=4 * n.M_prime, fs=n.sampling_rate)
        for stream in self._frames(modem, frames, seed, data=not pilot_only):
            accumulator.add(stream)
        table = accumulator.table(band=n.delta_f * n.M / 2)
        self.app.logger.debug(f"PSD of {system} over {accumulator.frames} frame(s)")
        return f"# system={n.name} pilot={kind.value}\n" + format_table(
            table.freqs, table.power_db, ("frequency_hz", "psd_db")
        )

    def papr_report(
        self,
        system: str,
        kind: PilotKind,
        sigma_u_sq: float,
        frames: int,
        seed: int,
        probability: float = 1e-2,
        pilot_only: bool = False,
        profile: bool = False,
    ) -> str:
        n = preset(system)
        modem = self._modem(n, kind, sigma_u_sq)
        accumulator = PaprAccumulator()
        profiles: list[np.ndarray] = []
        for stream in self._frames(modem, frames, seed, data=not pilot_only):
            accumulator.add(stream, modem.block_length)
            if profile:
                profiles.append(energy_profile(stream, modem.block_length))

        samples = accumulator.samples
        table = accumulator.ccdf()
        summary: dict[str, Any] = {
            "system": n.name,
            "pilot": kind.value,
            "blocks": samples.size,
            f"papr_at_{probability:g}_db": round(papr_at_probability(samples, probability), 4),
        }
        parts = [
            "# " + " ".join(f"{key}={value}" for key, value in summary.items()),
            format_table(table.thresholds_db, table.probability, ("papr_db", "ccdf")),
        ]
        if profile:
            mean_profile = np.mean(profiles, axis=0)
            parts.append(format_table(np.arange(mean_profile.size), mean_profile, ("sample", "energy")))
        return "\n\n".join(parts)


__all__ = ["ReportManager"]
