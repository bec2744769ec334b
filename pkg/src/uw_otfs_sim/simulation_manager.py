from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
import math
import time
from typing import TYPE_CHECKING, Any, Sequence

import numpy as np

from .analysis import PaprAccumulator, PsdAccumulator, papr_db_per_block
from .ce_operator import CpCeOperator, UwCeOperator
from .channel import add_awgn, apply_ltv, awgn_variance, sample_channel
from .cp_otfs import CpOtfsModem
from .detection import QamMapping, demap, nmse
from .errors import ConfigurationError
from .models import BemConfig, CsiMode, PilotConfig, PilotKind, ResultRow, SimulationPlan, SystemVariant
from .numerology import Numerology, bem_config, pilot_config, preset
from .storage import OperatorCache, content_key, create_operator_cache
from .uw_otfs import UwOtfsModem

if TYPE_CHECKING:
    from . import OtfsSimulatorApp

SWEEP_FIELDS = ("sigma_u_sq", "bem_rate", "alpha_bins")


@dataclass(frozen=True, slots=True)
class RealizationResult:
    index: int
    bit_errors: np.ndarray
    bit_count: int
    nmse: np.ndarray | None
    papr_db: np.ndarray | None = None
    tx_stream: np.ndarray | None = None


@dataclass(frozen=True, slots=True)
class SweepPoint:
    value: float
    plan: SimulationPlan
    rows: list[ResultRow]


@dataclass(frozen=True, slots=True)
class PlanOutcome:
    rows: list[ResultRow]
    bit_errors: np.ndarray
    bit_counts: np.ndarray
    nmse: np.ndarray | None
    papr: PaprAccumulator | None
    psd: PsdAccumulator | None


def default_pilot_kind(system: str, csi_mode: CsiMode = CsiMode.ESTIMATED) -> PilotKind:
    """Pilot a system sends when none is configured; perfect CSI sends none."""
    if csi_mode is CsiMode.PERFECT:
        return PilotKind.NONE
    variant = preset(system).variant
    return PilotKind.CHIRPED_DIRICHLET_UW if variant is SystemVariant.UW else PilotKind.EMBEDDED_IMPULSE


def bootstrap_confidence(
    a: Sequence[float],
    b: Sequence[float],
    rng: np.random.Generator,
    resamples: int = 2000,
) -> float:
    """Share of paired bootstrap resamples in which mean(a) < mean(b)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ConfigurationError("Bootstrap needs nonempty samples")
    picks_a = rng.integers(0, a.size, size=(resamples, a.size))
    picks_b = rng.integers(0, b.size, size=(resamples, b.size))
    return float(np.mean(a[picks_a].mean(axis=1) < b[picks_b].mean(axis=1)))


class SimulationManager:
    def __init__(self, app: "OtfsSimulatorApp") -> None:
        self.app = app
        self.operator_cache: OperatorCache | None = create_operator_cache(app)
        self._modems: dict[str, CpOtfsModem | UwOtfsModem] = {}

        # Config value cache for hot paths
        self._config_cache: dict[str, Any] = {}
        self._refresh_config_cache()

    def _refresh_config_cache(self) -> None:
        self._config_cache = {
            "carrier_hz": float(self.app.get_config("numerology.carrier-hz", 10e9)),
            "delay_spread_s": float(self.app.get_config("numerology.delay-spread-s", 2.5e-6)),
            "bootstrap_resamples": max(100, int(self.app.get_config("simulation.bootstrap-resamples", 2000))),
        }

    def reload(self) -> None:
        self._modems.clear()
        self.operator_cache = create_operator_cache(self.app)
        self._refresh_config_cache()

    def numerology_for(self, plan: SimulationPlan) -> Numerology:
        overrides: dict[str, Any] = {
            "f0": self._config_cache["carrier_hz"],
            "tau_m": self._config_cache["delay_spread_s"],
            "k_b": int(math.log2(plan.qam_order)),
        }
        return preset(
            plan.system,
            v_max=plan.velocity,
            M_b=plan.detection_bins,
            M_alpha=plan.alpha_bins,
            **overrides,
        )

    def build_modem(self, plan: SimulationPlan) -> CpOtfsModem | UwOtfsModem:
        key = content_key(plan.to_dict() | {"ebn0_grid": [], "realizations": 0, "master_seed": 0})
        cached = self._modems.get(key)
        if cached is not None:
            return cached

        n = self.numerology_for(plan)
        estimated = plan.csi_mode is CsiMode.ESTIMATED
        if plan.pilot_kind is PilotKind.NONE and estimated:
            raise ConfigurationError("pilot = none is only valid with perfect CSI")

        pilot = pilot_config(n, plan.pilot_kind, plan.sigma_u_sq)
        bem = bem_config(n, plan.bem_rate) if estimated else None
        modem: CpOtfsModem | UwOtfsModem
        if n.is_cp:
            modem = CpOtfsModem(n, pilot, bem)
        else:
            modem = UwOtfsModem(n, pilot, bem)

        if estimated:
            self._attach_operator(modem, n, pilot, bem)

        self._modems[key] = modem
        return modem

    def _attach_operator(
        self,
        modem: CpOtfsModem | UwOtfsModem,
        n: Numerology,
        pilot: PilotConfig,
        bem: BemConfig,
    ) -> None:
        operator_type = CpCeOperator if n.is_cp else UwCeOperator
        cache_key = content_key(n.to_dict(), pilot.to_dict(), bem.to_dict())
        if self.operator_cache is not None:
            operator = self.operator_cache.load(cache_key, operator_type)
            if operator is not None:
                self.app.logger.debug(f"Operator cache hit for {n.name} ({cache_key[:12]})")
                modem.operator = operator
                return
            self.app.logger.debug(f"Operator cache miss for {n.name} ({cache_key[:12]})")

        started = time.perf_counter()
        operator = modem.build_operator()
        self.app.logger.debug(f"Built CE operator for {n.name} in {time.perf_counter() - started:.2f}s")
        if self.operator_cache is not None:
            self.operator_cache.save(cache_key, operator)

    def run_realization(
        self,
        plan: SimulationPlan,
        index: int,
        modem: CpOtfsModem | UwOtfsModem | None = None,
    ) -> RealizationResult:
        if modem is None:
            modem = self.build_modem(plan)
        n = modem.numerology
        rng = np.random.default_rng(np.random.SeedSequence([plan.master_seed, index]))
        mapping = QamMapping.for_order(plan.qam_order)
        mask = modem.data_mask

        channel = sample_channel(rng, plan.paths, n.L_prime, n.nu_max, n.delta_f)
        bits = rng.integers(0, 2, size=int(mask.sum()) * mapping.bits_per_symbol)
        s = modem.transmit(mapping.map(bits))
        r_clean = apply_ltv(s, channel, n.M_prime)
        P_s = float(np.mean(np.abs(r_clean) ** 2))

        pilot_interference = None
        if plan.pilot_cancellation:
            pilot_interference = apply_ltv(modem.pilot_stream(), channel, n.M_prime)

        estimated = plan.csi_mode is CsiMode.ESTIMATED
        perfect = modem.perfect_ecms(channel) if estimated else None

        grid = plan.ebn0_grid
        bit_errors = np.zeros(len(grid), dtype=np.int64)
        nmse_values = np.zeros(len(grid)) if estimated else None
        for j, ebn0_db in enumerate(grid):
            sigma_w_sq = awgn_variance(P_s, modem.bits_per_sample, 10.0 ** (ebn0_db / 10.0))
            noise_rng = np.random.default_rng(np.random.SeedSequence([plan.master_seed, index, j + 1]))
            r = add_awgn(noise_rng, r_clean, sigma_w_sq)
            output = modem.receive(r, sigma_w_sq, plan.csi_mode, channel=channel, pilot_interference=pilot_interference)
            bit_errors[j] = int(np.count_nonzero(demap(output.symbols, mapping, mask) != bits))
            if perfect is not None:
                nmse_values[j] = nmse(perfect, output.ecms)

        papr = papr_db_per_block(s, modem.block_length) if "PAPR" in plan.metrics else None
        return RealizationResult(
            index=index,
            bit_errors=bit_errors,
            bit_count=int(bits.size),
            nmse=nmse_values,
            papr_db=papr,
            tx_stream=s if "PSD" in plan.metrics else None,
        )

    def run_plan_detailed(self, plan: SimulationPlan) -> PlanOutcome:
        started = time.perf_counter()
        self.app.logger.info(
            f"Running {plan.system}: {plan.realizations} realizations, {len(plan.ebn0_grid)} Eb/N0 points, "
            f"{plan.workers} worker(s)"
        )
        modem = self.build_modem(plan)

        def task(index: int) -> RealizationResult:
            return self.run_realization(plan, index, modem)

        indices = range(plan.realizations)
        if plan.workers > 1:
            with ThreadPoolExecutor(max_workers=plan.workers) as pool:
                results = list(pool.map(task, indices))
        else:
            results = [task(index) for index in indices]

        bit_errors = np.stack([result.bit_errors for result in results])
        bit_counts = np.array([result.bit_count for result in results], dtype=np.int64)
        nmse_values = None
        if plan.csi_mode is CsiMode.ESTIMATED:
            nmse_values = np.stack([result.nmse for result in results])

        papr = PaprAccumulator() if "PAPR" in plan.metrics else None
        psd = None
        if "PSD" in plan.metrics:
            n = modem.numerology
            psd = PsdAccumulator(seg_len=4 * n.M_prime, fs=n.sampling_rate)
        for result in results:
            if papr is not None:
                papr.values.append(result.papr_db)
            if psd is not None:
                psd.add(result.tx_stream)

        wall_time = time.perf_counter() - started
        total_bits = int(bit_counts.sum())
        rows: list[ResultRow] = []
        for j, ebn0_db in enumerate(plan.ebn0_grid):
            ber = float(bit_errors[:, j].sum()) / total_bits
            nmse_db = -math.inf
            if nmse_values is not None:
                nmse_db = 10.0 * math.log10(max(float(nmse_values[:, j].mean()), 1e-300))
            rows.append(
                ResultRow(
                    system=plan.system,
                    ebn0_db=float(ebn0_db),
                    velocity=float(plan.velocity),
                    realizations=plan.realizations,
                    ber=ber,
                    nmse_db=nmse_db,
                    seed=plan.master_seed,
                    wall_time_s=wall_time,
                )
            )
            self.app.logger.info(f"{plan.system} @ {ebn0_db:g} dB: BER={ber:.3e}, NMSE={nmse_db:.2f} dB")

        self.app.logger.info(f"Finished {plan.system} in {wall_time:.1f}s")
        return PlanOutcome(
            rows=rows,
            bit_errors=bit_errors,
            bit_counts=bit_counts,
            nmse=nmse_values,
            papr=papr,
            psd=psd,
        )

    def run_plan(self, plan: SimulationPlan) -> list[ResultRow]:
        return self.run_plan_detailed(plan).rows

    def sweep(self, plan: SimulationPlan, field: str, values: Sequence[float]) -> list[SweepPoint]:
        if field not in SWEEP_FIELDS:
            raise ConfigurationError(f"Cannot sweep '{field}' (expected one of {', '.join(SWEEP_FIELDS)})")
        points: list[SweepPoint] = []
        for value in values:
            coerced = int(value) if field == "alpha_bins" else float(value)
            self.app.logger.info(f"Sweep {field} = {coerced}")
            swept = replace(plan, **{field: coerced})
            points.append(SweepPoint(value=coerced, plan=swept, rows=self.run_plan(swept)))
        return points

    def confidence(self, a: Sequence[float], b: Sequence[float], seed: int = 0) -> float:
        rng = np.random.default_rng(seed)
        return bootstrap_confidence(a, b, rng, self._config_cache["bootstrap_resamples"])


__all__ = [
    "SWEEP_FIELDS",
    "RealizationResult",
    "PlanOutcome",
    "SweepPoint",
    "SimulationManager",
    "bootstrap_confidence",
    "default_pilot_kind",
]
