"""Leakage, spectrum and PAPR studies.

PSD and PAPR statistics are gathered through accumulators with an
associative ``merge`` so that frames can be processed in any grouping.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import signal

from .cp_otfs import rrc_spectrum
from .errors import BoundsError, DimensionError

LEAKAGE_THRESHOLD_DB = -40.0
DEFAULT_PAPR_THRESHOLDS_DB = np.round(np.arange(0.0, 16.0 + 1e-9, 0.1), 10)


@dataclass(frozen=True, slots=True)
class LeakageProfile:
    phi: np.ndarray
    psi_hat: np.ndarray
    M_alpha: int

    @property
    def energy(self) -> np.ndarray:
        return np.abs(self.phi) ** 2

    @property
    def energy_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 10.0 * np.log10(self.energy)


def leakage_profile(
    M: int,
    Q: int,
    alpha: float | None,
    p0: int,
    k_tau: int,
    M_alpha: int | None = None,
) -> LeakageProfile:
    """Delay-domain response of one embedded symbol behind a single zero-Doppler path."""
    if not 0 <= k_tau < Q * M:
        raise BoundsError(f"Delay must satisfy 0 <= k_tau' < Q*M, got {k_tau}")
    if not 0 <= p0 < M:
        raise BoundsError(f"Pilot row must satisfy 0 <= p0 < M, got {p0}")
    rrc = rrc_spectrum(M, Q, alpha=alpha, M_alpha=M_alpha)

    k = np.arange(Q)
    aliased = (rrc.psi**2).reshape(Q, M)
    psi_hat = (aliased * np.exp(-2j * np.pi * k_tau * k / Q)[:, None]).sum(axis=0)

    l = np.arange(M)
    m = np.arange(M)
    offset = p0 - m[:, None] + k_tau / Q
    phi = (np.exp(-2j * np.pi * l[None, :] * offset / M) @ psi_hat) / M
    return LeakageProfile(phi=phi, psi_hat=psi_hat, M_alpha=rrc.M_alpha)


def count_leaky_bins(profile: LeakageProfile, threshold_db: float = LEAKAGE_THRESHOLD_DB) -> int:
    """Delay bins other than the symbol's own bin whose energy exceeds the threshold."""
    energy = profile.energy
    leaky = energy > 10.0 ** (threshold_db / 10.0)
    leaky[int(np.argmax(energy))] = False
    return int(np.count_nonzero(leaky))


@dataclass(frozen=True, slots=True)
class PsdTable:
    freqs: np.ndarray
    power_db: np.ndarray


def _welch(s: np.ndarray, seg_len: int, overlap: float, window: str, fs: float) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(s, dtype=complex).reshape(-1)
    if seg_len > s.size:
        raise DimensionError(f"Segment length {seg_len} exceeds signal length {s.size}")
    if not 0.0 <= overlap < 1.0:
        raise BoundsError(f"Overlap must satisfy 0 <= overlap < 1, got {overlap}")
    freqs, power = signal.welch(
        s,
        fs=fs,
        window=window,
        nperseg=seg_len,
        noverlap=int(round(seg_len * overlap)),
        detrend=False,
        return_onesided=False,
        scaling="density",
    )
    return np.fft.fftshift(freqs), np.fft.fftshift(power)


def _normalize_db(freqs: np.ndarray, power: np.ndarray, band: float | None) -> np.ndarray:
    if band is None:
        reference = power.max()
    else:
        in_band = np.abs(freqs) <= band
        if not np.any(in_band):
            raise BoundsError(f"No frequency bins fall inside the band |f| <= {band}")
        reference = power[in_band].mean()
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(power / reference)


def welch_psd(
    s: np.ndarray,
    seg_len: int,
    overlap: float = 0.5,
    window: str = "hann",
    fs: float = 1.0,
    band: float | None = None,
) -> PsdTable:
    """Two-sided Welch PSD in dB, centered on DC.

    With ``band`` the in-band mean (|f| <= band) is 0 dB, otherwise the peak is.
    """
    freqs, power = _welch(s, seg_len, overlap, window, fs)
    return PsdTable(freqs=freqs, power_db=_normalize_db(freqs, power, band))


@dataclass(slots=True)
class PsdAccumulator:
    seg_len: int
    overlap: float = 0.5
    window: str = "hann"
    fs: float = 1.0
    freqs: np.ndarray | None = None
    total: np.ndarray | None = None
    frames: int = 0

    def add(self, s: np.ndarray) -> None:
        freqs, power = _welch(s, self.seg_len, self.overlap, self.window, self.fs)
        if self.total is None:
            self.freqs, self.total = freqs, power
        else:
            self.total = self.total + power
        self.frames += 1

    def merge(self, other: "PsdAccumulator") -> "PsdAccumulator":
        if other.total is None:
            return self
        if self.total is None:
            self.freqs, self.total, self.frames = other.freqs, other.total.copy(), other.frames
            return self
        if self.total.shape != other.total.shape:
            raise DimensionError("Cannot merge PSD accumulators with different segment lengths")
        self.total = self.total + other.total
        self.frames += other.frames
        return self

    def table(self, band: float | None = None) -> PsdTable:
        if self.total is None or self.frames == 0:
            raise DimensionError("PSD accumulator holds no frames")
        return PsdTable(freqs=self.freqs, power_db=_normalize_db(self.freqs, self.total / self.frames, band))


def _blocks(stream: np.ndarray, block_len: int) -> np.ndarray:
    stream = np.asarray(stream).reshape(-1)
    if block_len < 1 or stream.size % block_len:
        raise DimensionError(f"Stream of {stream.size} samples does not split into blocks of {block_len}")
    return stream.reshape(-1, block_len)


def papr_db_per_block(stream: np.ndarray, block_len: int) -> np.ndarray:
    power = np.abs(_blocks(stream, block_len)) ** 2
    mean = power.mean(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(mean > 0, 10.0 * np.log10(power.max(axis=1) / mean), -np.inf)


def energy_profile(stream: np.ndarray, block_len: int) -> np.ndarray:
    """Mean per-sample energy at each position of a delay block."""
    return (np.abs(_blocks(stream, block_len)) ** 2).mean(axis=0)


@dataclass(frozen=True, slots=True)
class PaprTable:
    thresholds_db: np.ndarray
    probability: np.ndarray


@dataclass(slots=True)
class PaprAccumulator:
    values: list[np.ndarray] = field(default_factory=list)

    def add(self, stream: np.ndarray, block_len: int) -> None:
        self.values.append(papr_db_per_block(stream, block_len))

    def merge(self, other: "PaprAccumulator") -> "PaprAccumulator":
        self.values.extend(other.values)
        return self

    @property
    def samples(self) -> np.ndarray:
        if not self.values:
            return np.zeros(0)
        return np.concatenate(self.values)

    def ccdf(self, thresholds_db: np.ndarray | None = None) -> PaprTable:
        return papr_ccdf_from_values(self.samples, thresholds_db)


def papr_ccdf_from_values(values: np.ndarray, thresholds_db: np.ndarray | None = None) -> PaprTable:
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.size == 0:
        raise DimensionError("PAPR CCDF needs at least one block")
    thresholds = DEFAULT_PAPR_THRESHOLDS_DB if thresholds_db is None else np.asarray(thresholds_db, dtype=float)
    probability = (values[None, :] > thresholds[:, None]).mean(axis=1)
    return PaprTable(thresholds_db=thresholds, probability=probability)


def papr_ccdf(frames, thresholds_db: np.ndarray | None = None) -> PaprTable:
    """CCDF of per-block PAPR; ``frames`` is a sequence of delay blocks."""
    rows = [np.asarray(block).reshape(-1) for block in frames]
    if not rows:
        raise DimensionError("PAPR CCDF needs at least one block")
    values = np.concatenate([papr_db_per_block(block, block.size) for block in rows])
    return papr_ccdf_from_values(values, thresholds_db)


def papr_at_probability(values: np.ndarray, probability: float) -> float:
    """PAPR level exceeded by a fraction ``probability`` of the blocks."""
    if not 0.0 < probability < 1.0:
        raise BoundsError(f"CCDF level must satisfy 0 < p < 1, got {probability}")
    return float(np.quantile(np.asarray(values, dtype=float), 1.0 - probability))


def format_table(x: np.ndarray, y: np.ndarray, headers: tuple[str, str], precision: int = 6) -> str:
    x = np.asarray(x).reshape(-1)
    y = np.asarray(y).reshape(-1)
    if x.size != y.size:
        raise DimensionError(f"Column lengths differ: {x.size} vs {y.size}")
    lines = [f"{headers[0]}\t{headers[1]}"]
    for a, b in zip(x, y):
        lines.append(f"{a:.{precision}g}\t{b:.{precision}g}" if math.isfinite(b) else f"{a:.{precision}g}\t{b}")
    return "\n".join(lines)


__all__ = [
    "LEAKAGE_THRESHOLD_DB",
    "LeakageProfile",
    "leakage_profile",
    "count_leaky_bins",
    "PsdTable",
    "welch_psd",
    "PsdAccumulator",
    "papr_db_per_block",
    "energy_profile",
    "PaprTable",
    "PaprAccumulator",
    "papr_ccdf",
    "papr_ccdf_from_values",
    "papr_at_probability",
    "format_table",
]
