from __future__ import annotations

from dataclasses import dataclass
import inspect
import math
from typing import Any

from .errors import ConfigurationError
from .models import BemConfig, PilotConfig, PilotKind, SystemVariant

# speed of light in km/h
C0_KMH = 1.079252849e9

DEFAULT_CARRIER_HZ = 10e9
DEFAULT_DELAY_SPREAD_S = 2.5e-6
DEFAULT_VELOCITY_KMH = 400.0

# Numerology columns of the UW / CP*, CP**, CP*** comparison table.
# Every entry shares delta_f = 26 kHz, M = 32, N = 16, Q = 4; the
# CP columns list (M_g, M_ce, m_ce) and M_alpha exactly as published.
PRESET_TABLE: dict[str, dict[str, Any]] = {
    "UW": {"variant": "uw"},
    "CP*": {"variant": "cp", "M_g": 9, "M_ce": 6, "m_ce": 2, "M_alpha": 6},
    "CP**": {"variant": "cp", "M_g": 11, "M_ce": 6, "m_ce": 3, "M_alpha": 5},
    "CP***": {"variant": "cp", "M_g": 9, "M_ce": 6, "m_ce": 2, "M_alpha": 8},
}
PRESET_COMMON: dict[str, Any] = {"M": 32, "N": 16, "Q": 4, "delta_f": 26e3}

# GCE-BEM rates per velocity used by the published simulations.
BEM_RATE_TABLE: dict[SystemVariant, dict[float, float]] = {
    SystemVariant.UW: {200.0: 7.0, 400.0: 3.5},
    SystemVariant.CP: {200.0: 6.0, 400.0: 3.0},
}


def _is_power_of_two(value: int) -> bool:
    return value >= 1 and (value & (value - 1)) == 0


def nu_max_from_velocity(v: float, f0: float) -> float:
    if v < 0:
        raise ConfigurationError(f"Velocity must satisfy v >= 0, got {v}")
    if f0 <= 0:
        raise ConfigurationError(f"Carrier frequency must satisfy f0 > 0, got {f0}")
    return v * f0 / C0_KMH


@dataclass(frozen=True, slots=True)
class SpectralEfficiency:
    T_tx: float
    R_s: float
    BW: float
    eta: float


@dataclass(frozen=True, slots=True)
class Numerology:
    name: str
    variant: SystemVariant
    M: int
    N: int
    Q: int
    delta_f: float
    f0: float
    tau_m: float
    v_max: float
    k_b: int
    M_prime: int
    L_prime: int
    nu_max: float
    M_s: int
    M_b: int
    M_h: int
    M_x_prime: int
    alpha: float = 0.0
    M_alpha: int = 0
    M_cp: int = 0
    M_g: int = 0
    M_ce: int = 0
    m_ce: int = 0
    M_gi: int = 0
    k_h: int = 0

    @property
    def is_cp(self) -> bool:
        return self.variant is SystemVariant.CP

    @property
    def M0(self) -> int:
        return self.M_g * self.N if self.is_cp else 0

    @property
    def data_count(self) -> int:
        return self.M * self.N - self.M0

    @property
    def sampling_rate(self) -> float:
        return self.M_prime * self.delta_f

    @property
    def frame_length(self) -> int:
        return self.M_x_prime * self.N

    @property
    def M_ce_effective(self) -> int:
        """Rows of the CE observation per Doppler bin (M_ce for CP, M_h for UW)."""
        return self.M_ce if self.is_cp else self.M_h

    @classmethod
    def derive(
        cls,
        variant: SystemVariant | str,
        M: int,
        N: int,
        Q: int,
        delta_f: float,
        tau_m: float = DEFAULT_DELAY_SPREAD_S,
        f0: float = DEFAULT_CARRIER_HZ,
        v_max: float = DEFAULT_VELOCITY_KMH,
        k_b: int = 4,
        alpha: float | None = None,
        M_alpha: int | None = None,
        M_cp: int | None = None,
        M_gi: int | None = None,
        M_g: int = 0,
        M_ce: int = 0,
        m_ce: int = 0,
        M_b: int | None = None,
        name: str | None = None,
    ) -> "Numerology":
        if not isinstance(variant, SystemVariant):
            variant = SystemVariant.parse(str(variant))
        if not _is_power_of_two(int(M)) or not _is_power_of_two(int(N)):
            raise ConfigurationError(f"M and N must be powers of two, got M={M}, N={N}")
        if Q < 1:
            raise ConfigurationError(f"Oversampling must satisfy Q >= 1, got Q={Q}")
        if delta_f <= 0:
            raise ConfigurationError(f"Subcarrier spacing must satisfy delta_f > 0, got {delta_f}")
        if tau_m < 0:
            raise ConfigurationError(f"Delay spread must satisfy tau_m >= 0, got {tau_m}")
        if k_b < 1:
            raise ConfigurationError(f"Bits per symbol must satisfy k_b >= 1, got {k_b}")

        M_prime = M * Q
        L_prime = int(round(tau_m * M_prime * delta_f)) + 1
        nu_max = nu_max_from_velocity(v_max, f0)

        fields: dict[str, Any] = {}
        if variant is SystemVariant.CP:
            if M_alpha is None:
                M_alpha = int(math.floor((alpha or 0.0) * M / 2 + 1e-9))
            if alpha is None:
                alpha = 2.0 * M_alpha / M
            if not 0.0 <= alpha <= 1.0:
                raise ConfigurationError(f"Roll-off must satisfy 0 <= alpha <= 1, got {alpha}")
            if M_alpha < 0:
                raise ConfigurationError(f"Excess bins must satisfy M_alpha >= 0, got {M_alpha}")
            if M_cp is None:
                M_cp = L_prime - 1
            if M_cp < L_prime - 1:
                raise ConfigurationError(
                    f"Cyclic prefix must cover the channel: M_cp >= L' - 1 violated ({M_cp} < {L_prime - 1})"
                )
            M_s = M + 2 * M_alpha
            if M_s > M_prime:
                raise ConfigurationError(
                    f"Active subcarriers exceed the oversampled grid: M + 2*M_alpha <= M' violated ({M_s} > {M_prime})"
                )
            if not (0 <= M_ce <= M_g <= M):
                raise ConfigurationError(
                    f"Pilot guard must satisfy 0 <= M_ce <= M_g <= M (M_ce={M_ce}, M_g={M_g}, M={M})"
                )
            if m_ce < 0 or m_ce + M_ce > M:
                raise ConfigurationError(
                    f"CE region must satisfy 0 <= m_ce and m_ce + M_ce <= M (m_ce={m_ce}, M_ce={M_ce})"
                )
            fields.update(
                alpha=float(alpha),
                M_alpha=int(M_alpha),
                M_cp=int(M_cp),
                M_g=int(M_g),
                M_ce=int(M_ce),
                m_ce=int(m_ce),
                M_h=int(M_cp) + 1,
                M_x_prime=M_prime + int(M_cp),
            )
        else:
            if M_gi is None:
                M_gi = 2 * L_prime - 1
            if M_gi % 2 != 1:
                raise ConfigurationError(f"Guard interval must be odd, got M_gi={M_gi}")
            if M_gi < 2 * L_prime - 1:
                raise ConfigurationError(
                    f"Guard interval must hold the pilot echo: M_gi >= 2L' - 1 violated ({M_gi} < {2 * L_prime - 1})"
                )
            M_s = M + M_gi
            if M_s > M_prime:
                raise ConfigurationError(
                    f"Active subcarriers exceed the oversampled grid: M + M_gi <= M' violated ({M_s} > {M_prime})"
                )
            M_h = (M_gi + 1) // 2
            fields.update(M_gi=int(M_gi), M_h=M_h, k_h=M_prime - M_h, M_x_prime=M_prime)

        if M_b is None:
            M_b = M_s
        if not (M <= M_b <= M_prime):
            raise ConfigurationError(f"Detection bins must satisfy M <= M_b <= M' (M_b={M_b}, M={M}, M'={M_prime})")

        return cls(
            name=name or variant.value.upper(),
            variant=variant,
            M=int(M),
            N=int(N),
            Q=int(Q),
            delta_f=float(delta_f),
            f0=float(f0),
            tau_m=float(tau_m),
            v_max=float(v_max),
            k_b=int(k_b),
            M_prime=M_prime,
            L_prime=L_prime,
            nu_max=nu_max,
            M_s=int(M_s),
            M_b=int(M_b),
            **fields,
        )

    def raw(self) -> dict[str, Any]:
        """Inputs that reproduce this numerology through :meth:`derive`."""
        data: dict[str, Any] = {
            "variant": self.variant.value,
            "M": self.M,
            "N": self.N,
            "Q": self.Q,
            "delta_f": self.delta_f,
            "tau_m": self.tau_m,
            "f0": self.f0,
            "v_max": self.v_max,
            "k_b": self.k_b,
            "M_b": self.M_b,
            "name": self.name,
        }
        if self.is_cp:
            data.update(
                alpha=self.alpha,
                M_alpha=self.M_alpha,
                M_cp=self.M_cp,
                M_g=self.M_g,
                M_ce=self.M_ce,
                m_ce=self.m_ce,
            )
        else:
            data["M_gi"] = self.M_gi
        return data

    def to_dict(self) -> dict[str, Any]:
        data = self.raw()
        data.update(
            M_prime=self.M_prime,
            L_prime=self.L_prime,
            nu_max=self.nu_max,
            M_s=self.M_s,
            M_h=self.M_h,
            M_x_prime=self.M_x_prime,
            k_h=self.k_h,
        )
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Numerology":
        allowed = set(inspect.signature(cls.derive).parameters)
        return cls.derive(**{key: value for key, value in data.items() if key in allowed})


def preset(
    name: str,
    v_max: float = DEFAULT_VELOCITY_KMH,
    M_b: int | None = None,
    M_alpha: int | None = None,
    **overrides: Any,
) -> Numerology:
    key = name.strip().upper()
    if key not in PRESET_TABLE:
        raise ConfigurationError(f"Unknown system preset '{name}' (expected one of {', '.join(PRESET_TABLE)})")
    params: dict[str, Any] = dict(PRESET_COMMON)
    params.update(PRESET_TABLE[key])
    if M_alpha is not None:
        if params["variant"] != "cp":
            raise ConfigurationError("M_alpha applies to CP presets only")
        params["M_alpha"] = int(M_alpha)
    params.update(overrides)
    return Numerology.derive(v_max=v_max, M_b=M_b, name=key, **params)


def presets(v_max: float = DEFAULT_VELOCITY_KMH) -> dict[str, Numerology]:
    return {name: preset(name, v_max=v_max) for name in PRESET_TABLE}


def spectral_efficiency(n: Numerology, k_b: int | None = None) -> SpectralEfficiency:
    bits = n.k_b if k_b is None else int(k_b)
    if n.is_cp:
        T_tx = (n.M_prime + n.M_cp) * n.N / (n.M_prime * n.delta_f)
        R_s = (n.M - n.M_g) * n.N / T_tx
    else:
        T_tx = n.N / n.delta_f
        R_s = n.M * n.N / T_tx
    BW = n.delta_f * n.M_s
    return SpectralEfficiency(T_tx=T_tx, R_s=R_s, BW=BW, eta=bits * R_s / BW)


def embedded_pilot_energy(sigma_u_sq: float, n: Numerology) -> float:
    """rho0^2 giving the embedded pilot the same energy share as a UW pilot of sigma_u^2."""
    if not 0.0 <= sigma_u_sq < 1.0:
        raise ConfigurationError(f"Pilot energy fraction must satisfy 0 <= sigma_u^2 < 1, got {sigma_u_sq}")
    if n.M0 == 0:
        raise ConfigurationError("Embedded pilot needs a guard region (M_g >= 1)")
    return sigma_u_sq / (1.0 - sigma_u_sq) * (n.M * n.N / n.M0 - 1.0)


def pilot_config(n: Numerology, kind: PilotKind, sigma_u_sq: float = 0.5) -> PilotConfig:
    if not 0.0 <= sigma_u_sq < 1.0:
        raise ConfigurationError(f"Pilot energy fraction must satisfy 0 <= sigma_u^2 < 1, got {sigma_u_sq}")
    if kind is PilotKind.EMBEDDED_IMPULSE:
        if not n.is_cp:
            raise ConfigurationError("Embedded impulse pilot requires the CP variant")
        if n.M_g < 1:
            raise ConfigurationError("Embedded impulse pilot requires M_g >= 1")
        return PilotConfig(
            kind=kind,
            sigma_u_sq=sigma_u_sq,
            rho0_sq=embedded_pilot_energy(sigma_u_sq, n),
            p0=(n.M_g - 1) // 2,
            q0=n.N // 2 - 1,
            M0=n.M0,
        )
    if kind.is_uw:
        if n.is_cp:
            raise ConfigurationError(f"Pilot '{kind.value}' requires the UW variant")
        return PilotConfig(kind=kind, sigma_u_sq=sigma_u_sq)
    return PilotConfig(kind=PilotKind.NONE, M0=n.M0)


def default_bem_rate(delta_f: float, nu_max: float) -> float:
    if nu_max <= 0:
        raise ConfigurationError("Static channel (nu_max = 0): a GCE-BEM rate is not defined")
    return delta_f / (2.0 * nu_max)


def bem_config(n: Numerology, n_nu: float | None = None) -> BemConfig:
    """BEM grid for ``n``; the rate falls back to the published per-velocity value, then to delta_f / (2 nu_max)."""
    if n_nu is None or n_nu <= 0:
        table = BEM_RATE_TABLE[n.variant]
        n_nu = table.get(float(n.v_max))
        if n_nu is None:
            n_nu = default_bem_rate(n.delta_f, n.nu_max)
    return BemConfig(n_nu=float(n_nu), N=n.N)


__all__ = [
    "C0_KMH",
    "PRESET_TABLE",
    "Numerology",
    "SpectralEfficiency",
    "nu_max_from_velocity",
    "preset",
    "presets",
    "spectral_efficiency",
    "embedded_pilot_energy",
    "pilot_config",
    "default_bem_rate",
    "bem_config",
]
