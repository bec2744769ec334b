from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
import math
from typing import Any

import numpy as np

from .errors import ConfigurationError, DimensionError


class SystemVariant(str, Enum):
    UW = "uw"
    CP = "cp"

    @staticmethod
    def parse(value: str | None) -> "SystemVariant":
        if not value:
            raise ConfigurationError("System variant must be one of: uw, cp")
        normalized = value.strip().lower()
        for variant in SystemVariant:
            if variant.value == normalized:
                return variant
        raise ConfigurationError(f"Unknown system variant '{value}' (expected uw or cp)")


class PilotKind(str, Enum):
    EMBEDDED_IMPULSE = "embedded"
    DIRAC_UW = "dirac"
    CHIRPED_DIRICHLET_UW = "uw"
    NONE = "none"

    @property
    def is_uw(self) -> bool:
        return self in (PilotKind.DIRAC_UW, PilotKind.CHIRPED_DIRICHLET_UW)

    @staticmethod
    def parse(value: str | None) -> "PilotKind":
        if not value:
            return PilotKind.NONE
        normalized = value.strip().lower()
        aliases = {"chirped": PilotKind.CHIRPED_DIRICHLET_UW, "impulse": PilotKind.EMBEDDED_IMPULSE}
        if normalized in aliases:
            return aliases[normalized]
        for kind in PilotKind:
            if kind.value == normalized:
                return kind
        raise ConfigurationError(f"Unknown pilot kind '{value}' (expected dirac, uw, embedded or none)")


class CsiMode(str, Enum):
    PERFECT = "perfect"
    ESTIMATED = "estimated"

    @staticmethod
    def parse(value: str | None) -> "CsiMode":
        if not value:
            return CsiMode.ESTIMATED
        normalized = value.strip().lower()
        for mode in CsiMode:
            if mode.value == normalized:
                return mode
        raise ConfigurationError(f"Unknown CSI mode '{value}' (expected perfect or estimated)")


METRICS = ("BER", "NMSE", "PAPR", "PSD")


@dataclass(frozen=True, slots=True)
class PilotConfig:
    kind: PilotKind
    sigma_u_sq: float = 0.0
    rho0_sq: float = 0.0
    p0: int = 0
    q0: int = 0
    M0: int = 0

    @property
    def amplitude(self) -> float:
        """Embedded pilot amplitude x0 = rho0 * sqrt(M0)."""
        return math.sqrt(self.rho0_sq * self.M0)

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "sigma_u_sq": self.sigma_u_sq,
            "rho0_sq": self.rho0_sq,
            "p0": self.p0,
            "q0": self.q0,
            "M0": self.M0,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "PilotConfig":
        return cls(
            kind=PilotKind.parse(str(data.get("kind", "none"))),
            sigma_u_sq=float(data.get("sigma_u_sq", 0.0)),
            rho0_sq=float(data.get("rho0_sq", 0.0)),
            p0=int(data.get("p0", 0)),
            q0=int(data.get("q0", 0)),
            M0=int(data.get("M0", 0)),
        )


@dataclass(frozen=True, slots=True)
class BemConfig:
    n_nu: float
    N: int

    def __post_init__(self) -> None:
        if not self.n_nu > 0:
            raise ConfigurationError(f"GCE-BEM rate must be positive (n_nu > 0), got {self.n_nu}")
        if self.N < 1:
            raise ConfigurationError("GCE-BEM grid needs N >= 1")

    @property
    def V(self) -> np.ndarray:
        return np.arange(self.N, dtype=float) - (self.N - 1) / 2.0

    def to_dict(self) -> dict[str, Any]:
        return {"n_nu": self.n_nu, "N": self.N}


@dataclass(frozen=True, slots=True)
class ChannelRealization:
    delays: np.ndarray
    dopplers: np.ndarray
    gains: np.ndarray

    def __post_init__(self) -> None:
        if not (len(self.delays) == len(self.dopplers) == len(self.gains)):
            raise DimensionError("Channel delays, dopplers and gains must have equal length")

    @property
    def P(self) -> int:
        return len(self.delays)

    @classmethod
    def single_path(cls, gain: complex = 1.0, delay: int = 0, doppler: float = 0.0) -> "ChannelRealization":
        return cls(
            delays=np.array([int(delay)]),
            dopplers=np.array([float(doppler)]),
            gains=np.array([complex(gain)]),
        )

    def paths(self):
        return zip(self.gains, self.delays, self.dopplers)


@dataclass(frozen=True, slots=True)
class GceBemChannel:
    H_ce: np.ndarray
    n_nu: float
    M_x_prime: int

    @property
    def M_h(self) -> int:
        return self.H_ce.shape[0]

    @property
    def N(self) -> int:
        return self.H_ce.shape[1]


@dataclass(slots=True)
class ResultRow:
    system: str
    ebn0_db: float
    velocity: float
    realizations: int
    ber: float
    nmse_db: float
    seed: int
    wall_time_s: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "system": self.system,
            "ebn0_db": self.ebn0_db,
            "velocity": self.velocity,
            "realizations": self.realizations,
            "ber": self.ber,
            "nmse_db": self.nmse_db,
            "seed": self.seed,
            "wall_time_s": self.wall_time_s,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ResultRow":
        return cls(
            system=str(data.get("system", "")),
            ebn0_db=float(data.get("ebn0_db", 0.0)),
            velocity=float(data.get("velocity", 0.0)),
            realizations=int(data.get("realizations", 0)),
            ber=float(data.get("ber", 0.0)),
            nmse_db=float(data.get("nmse_db", 0.0)),
            seed=int(data.get("seed", 0)),
            wall_time_s=float(data.get("wall_time_s", 0.0)),
        )


@dataclass(frozen=True, slots=True)
class SimulationPlan:
    system: str
    ebn0_grid: tuple[float, ...]
    velocity: float = 400.0
    realizations: int = 400
    master_seed: int = 1
    pilot_kind: PilotKind = PilotKind.CHIRPED_DIRICHLET_UW
    sigma_u_sq: float = 0.5
    bem_rate: float | None = None
    csi_mode: CsiMode = CsiMode.ESTIMATED
    pilot_cancellation: bool = False
    metrics: tuple[str, ...] = ("BER", "NMSE")
    paths: int = 16
    qam_order: int = 16
    workers: int = 1
    detection_bins: int | None = None
    alpha_bins: int | None = None

    def __post_init__(self) -> None:
        if self.realizations < 1:
            raise ConfigurationError("Simulation plan needs realizations >= 1")
        if not self.ebn0_grid:
            raise ConfigurationError("Simulation plan needs a nonempty Eb/N0 grid")
        if self.paths < 1:
            raise ConfigurationError("Simulation plan needs paths >= 1")
        if self.workers < 1:
            raise ConfigurationError("Simulation plan needs workers >= 1")
        unknown = [metric for metric in self.metrics if metric not in METRICS]
        if unknown:
            raise ConfigurationError(f"Unknown metrics {unknown} (expected a subset of {list(METRICS)})")

    def to_dict(self) -> dict[str, Any]:
        return {
            "system": self.system,
            "ebn0_grid": list(self.ebn0_grid),
            "velocity": self.velocity,
            "realizations": self.realizations,
            "master_seed": self.master_seed,
            "pilot_kind": self.pilot_kind.value,
            "sigma_u_sq": self.sigma_u_sq,
            "bem_rate": self.bem_rate,
            "csi_mode": self.csi_mode.value,
            "pilot_cancellation": self.pilot_cancellation,
            "metrics": list(self.metrics),
            "paths": self.paths,
            "qam_order": self.qam_order,
            "detection_bins": self.detection_bins,
            "alpha_bins": self.alpha_bins,
        }


__all__ = [
    "SystemVariant",
    "PilotKind",
    "CsiMode",
    "METRICS",
    "PilotConfig",
    "BemConfig",
    "ChannelRealization",
    "GceBemChannel",
    "ResultRow",
    "SimulationPlan",
]
