"""UW-OTFS: a precoded data block whose last M_gi samples vanish, plus a
unique-word pilot living in that guard interval.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .ce_operator import UwCeOperator
from .channel import apply_gce_bem, bits_per_sample
from .detection import EcmSet, ReceiverOutput, assemble_dd, bin_indices, detect_frame
from .errors import BoundsError, ConfigurationError, DimensionError
from .models import BemConfig, ChannelRealization, CsiMode, GceBemChannel, PilotConfig, PilotKind
from .numerics import dirichlet_kernel, isft, null_space_basis
from .numerology import Numerology


@dataclass(frozen=True, slots=True)
class UwPrecoder:
    G: np.ndarray
    active: np.ndarray
    alpha_d: float
    M_prime: int

    @property
    def B(self) -> np.ndarray:
        B = np.zeros((self.M_prime, self.active.size))
        B[self.active, np.arange(self.active.size)] = 1.0
        return B


def active_subcarriers(n: Numerology) -> np.ndarray:
    return bin_indices(n.M_prime, n.M_s)


def build_precoder(n: Numerology, sigma_u_sq: float = 0.0) -> UwPrecoder:
    if n.is_cp:
        raise ConfigurationError("UW precoder requires a UW numerology")
    if not 0.0 <= sigma_u_sq < 1.0:
        raise ConfigurationError(f"Pilot energy fraction must satisfy 0 <= sigma_u^2 < 1, got {sigma_u_sq}")
    active = active_subcarriers(n)
    guard = np.arange(n.M_prime - n.M_gi, n.M_prime)
    T = np.exp(2j * np.pi * np.outer(guard, active) / n.M_prime) / math.sqrt(n.M_prime)
    G = null_space_basis(T)
    if G.shape[1] != n.M:
        raise ConfigurationError(
            f"Guard-interval null space has dimension {G.shape[1]}, expected M = {n.M}"
        )
    trace = float(np.real(np.trace(G.conj().T @ G)))
    alpha_d = math.sqrt(n.M_prime * (1.0 - sigma_u_sq) / trace)
    return UwPrecoder(G=G, active=active, alpha_d=alpha_d, M_prime=n.M_prime)


def tx_data_frame(D: np.ndarray, pre: UwPrecoder, n: Numerology) -> np.ndarray:
    X = isft(D)
    spectrum = np.zeros((n.M_prime, n.N), dtype=complex)
    spectrum[pre.active, :] = pre.G @ X
    return pre.alpha_d * np.fft.ifft(spectrum, axis=0, norm="ortho")


@dataclass(frozen=True, slots=True)
class UwPilot:
    c: np.ndarray
    kind: PilotKind
    sigma_u_sq: float
    c0: np.ndarray | None = None

    def stream(self) -> np.ndarray:
        return math.sqrt(self.sigma_u_sq) * self.c


def uw_pilot(n: Numerology, kind: PilotKind, sigma_u_sq: float = 0.5) -> UwPilot:
    if n.M_gi % 2 != 1:
        raise ConfigurationError(f"Guard interval must be odd, got M_gi={n.M_gi}")
    total = n.M_prime * n.N
    p = np.arange(total)

    if kind is PilotKind.DIRAC_UW:
        c = np.where(p % n.M_prime == n.k_h, math.sqrt(n.M_prime), 0.0).astype(complex)
        return UwPilot(c=c, kind=kind, sigma_u_sq=sigma_u_sq)

    if kind is PilotKind.CHIRPED_DIRICHLET_UW:
        active = active_subcarriers(n)
        c0 = np.exp(2j * np.pi * np.outer(p + n.M_h, active) / n.M_prime).sum(axis=1) / math.sqrt(n.M_s)
        chirp = np.exp(-1j * np.pi * (p / n.M_prime) * (p / total - 1.0))
        return UwPilot(c=chirp * c0, kind=kind, sigma_u_sq=sigma_u_sq, c0=c0)

    if kind is PilotKind.NONE:
        return UwPilot(c=np.zeros(total, dtype=complex), kind=kind, sigma_u_sq=0.0)
    raise ConfigurationError(f"Pilot '{kind.value}' is not a UW pilot")


def extract_ce(r: np.ndarray, n: Numerology) -> np.ndarray:
    r = np.asarray(r)
    if r.shape[0] < n.frame_length:
        raise BoundsError(f"Received stream needs {n.frame_length} samples, got {r.shape[0]}")
    blocks = r[: n.frame_length].reshape(n.N, n.M_prime).T
    return blocks[n.k_h :, :]


def build_uw_ce_operator(n: Numerology, pilot: UwPilot, bem: BemConfig) -> UwCeOperator:
    if pilot.kind is PilotKind.NONE or pilot.sigma_u_sq <= 0:
        raise ConfigurationError("UW channel estimation requires a pilot with sigma_u^2 > 0")
    M_h, N = n.M_h, n.N
    taps = np.arange(M_h)
    time = taps[:, None] + n.M_prime * np.arange(N)[None, :] + n.k_h
    phase = np.exp(2j * np.pi * bem.V[None, None, :] * time[:, :, None] / (bem.n_nu * N * n.M_prime))
    samples = math.sqrt(pilot.sigma_u_sq) * pilot.c[time[:, :, None] - taps[None, None, :]]
    A_bar = samples[:, :, :, None] * phase[:, :, None, :]
    A_ce = A_bar.reshape(M_h * N, M_h * N, order="F")
    return UwCeOperator.from_matrix(A_ce, M_h, N)


def estimate_bem_uw(Y_ce: np.ndarray, op: UwCeOperator, sigma_w_sq: float) -> np.ndarray:
    return op.estimate(Y_ce, sigma_w_sq)


def _tail_sum(z: np.ndarray, n: Numerology) -> np.ndarray:
    """sum_{k < M'-M_gi} exp(j2πkz/M') in closed form."""
    K = n.M_prime - n.M_gi
    return K * dirichlet_kernel(z * K / n.M_prime, K)


def _path_kernel(pre: UwPrecoder, n: Numerology, delay: int, doppler: float) -> np.ndarray:
    p = np.arange(n.M_prime)
    S = _tail_sum(pre.active[None, :] - p[:, None] + doppler, n)
    phase = np.exp(2j * np.pi * doppler * delay / n.M_prime) * np.exp(-2j * np.pi * p * delay / n.M_prime)
    return (pre.alpha_d / n.M_prime) * phase[:, None] * (S @ pre.G)


def perfect_ecms_uw(ch: ChannelRealization, pre: UwPrecoder, n: Numerology) -> np.ndarray:
    """ECMs of all N delay blocks, shape (N, M', M)."""
    blocks = np.arange(n.N)
    ecms = np.zeros((n.N, n.M_prime, n.M), dtype=complex)
    for gain, delay, doppler in ch.paths():
        kernel = _path_kernel(pre, n, int(delay), float(doppler))
        ecms += gain * np.exp(2j * np.pi * blocks * doppler)[:, None, None] * kernel[None, :, :]
    return ecms


def perfect_ecm_uw(ch: ChannelRealization, pre: UwPrecoder, n: Numerology, block: int) -> np.ndarray:
    ecm = np.zeros((n.M_prime, n.M), dtype=complex)
    for gain, delay, doppler in ch.paths():
        ecm += gain * np.exp(2j * np.pi * block * doppler) * _path_kernel(pre, n, int(delay), float(doppler))
    return ecm


def wigner_uw(r: np.ndarray, n: Numerology) -> np.ndarray:
    r = np.asarray(r)
    if r.shape[0] < n.frame_length:
        raise DimensionError(f"Received stream needs {n.frame_length} samples, got {r.shape[0]}")
    return np.fft.fft(r[: n.frame_length].reshape(n.N, n.M_prime).T, axis=0, norm="ortho")


@dataclass(frozen=True, slots=True)
class UwEcmTensors:
    delay_phase: np.ndarray  # (M_b, M_h, N)
    kernel: np.ndarray  # (M_b, M, N)
    doppler: np.ndarray  # (N blocks, N bases)


def build_uw_ecm_tensors(n: Numerology, pre: UwPrecoder, bem: BemConfig) -> UwEcmTensors:
    rows = bin_indices(n.M_prime, n.M_b)
    taps = np.arange(n.M_h)
    shift = bem.V / (bem.n_nu * n.N)

    delay_phase = (
        np.exp(-2j * np.pi * rows[:, None, None] * taps[None, :, None] / n.M_prime)
        * np.exp(2j * np.pi * shift[None, None, :] * taps[None, :, None] / n.M_prime)
    )
    z = pre.active[None, :, None] - rows[:, None, None] + shift[None, None, :]
    kernel = (pre.alpha_d / n.M_prime) * np.einsum("alv,lq->aqv", _tail_sum(z, n), pre.G)
    doppler = np.exp(2j * np.pi * np.outer(np.arange(n.N), shift))
    return UwEcmTensors(delay_phase=delay_phase, kernel=kernel, doppler=doppler)


def reconstruct_ecm_uw(
    H_ce_est: np.ndarray,
    pre: UwPrecoder,
    n: Numerology,
    bem: BemConfig,
    block: int,
    tensors: UwEcmTensors | None = None,
) -> np.ndarray:
    """Estimated ECM of one block, restricted to the M_b detection rows."""
    if tensors is None:
        tensors = build_uw_ecm_tensors(n, pre, bem)
    weights = np.einsum("ptv,tv->pv", tensors.delay_phase, H_ce_est)
    return np.einsum("aqv,v,av->aq", tensors.kernel, tensors.doppler[block], weights)


def estimated_pilot_response(pilot: UwPilot, H_ce_est: np.ndarray, n: Numerology, bem: BemConfig) -> np.ndarray:
    """The emitted pilot distorted by the estimated GCE-BEM channel."""
    channel = GceBemChannel(np.asarray(H_ce_est), bem.n_nu, n.M_prime)
    return apply_gce_bem(pilot.stream(), channel, n.N, n.M_h)


def rx_pipeline_uw(
    r: np.ndarray,
    op: UwCeOperator | None,
    pre: UwPrecoder,
    n: Numerology,
    bem: BemConfig | None,
    sigma_w_sq: float,
    csi: CsiMode,
    tensors: UwEcmTensors | None = None,
    channel: ChannelRealization | None = None,
    pilot_interference: np.ndarray | None = None,
    pilot: UwPilot | None = None,
) -> ReceiverOutput:
    """UW receiver, from channel estimation to detection.

    With estimated CSI and a known pilot, the pilot seen through the
    estimated channel is removed before detection unless a genie
    pilot_interference is supplied.
    """
    rows = bin_indices(n.M_prime, n.M_b)
    H_ce = None

    if csi is CsiMode.ESTIMATED:
        if op is None or bem is None:
            raise ConfigurationError("Estimated CSI needs a CE operator and a BEM configuration")
        if tensors is None:
            tensors = build_uw_ecm_tensors(n, pre, bem)
        H_ce = estimate_bem_uw(extract_ce(r, n), op, sigma_w_sq)
        matrices = np.stack([reconstruct_ecm_uw(H_ce, pre, n, bem, block, tensors) for block in range(n.N)])
        if pilot_interference is None and pilot is not None and pilot.kind is not PilotKind.NONE:
            pilot_interference = estimated_pilot_response(pilot, H_ce, n, bem)
    else:
        if channel is None:
            raise ConfigurationError("Perfect CSI needs the channel realization")
        matrices = perfect_ecms_uw(channel, pre, n)[:, rows, :]
    ecms = EcmSet(matrices)

    data_stream = np.asarray(r) if pilot_interference is None else np.asarray(r) - pilot_interference
    Y = wigner_uw(data_stream, n)
    X_tilde = detect_frame(Y[rows, :], ecms, sigma_w_sq)
    return ReceiverOutput(symbols=assemble_dd(X_tilde), ecms=ecms, H_ce=H_ce)


class UwOtfsModem:
    def __init__(
        self,
        numerology: Numerology,
        pilot: PilotConfig,
        bem: BemConfig | None = None,
        operator: UwCeOperator | None = None,
    ) -> None:
        if numerology.is_cp:
            raise ConfigurationError("UW-OTFS modem requires a UW numerology")
        sigma_u_sq = pilot.sigma_u_sq if pilot.kind is not PilotKind.NONE else 0.0
        self.numerology = numerology
        self.pilot_config = pilot
        self.precoder = build_precoder(numerology, sigma_u_sq)
        self.pilot = uw_pilot(numerology, pilot.kind, sigma_u_sq)
        self.bem = bem
        self.rows = bin_indices(numerology.M_prime, numerology.M_b)
        self.operator = operator
        self.tensors = build_uw_ecm_tensors(numerology, self.precoder, bem) if bem is not None else None

    @property
    def data_mask(self) -> np.ndarray:
        return np.ones((self.numerology.M, self.numerology.N), dtype=bool)

    @property
    def block_length(self) -> int:
        return self.numerology.M_prime

    @property
    def bits_per_sample(self) -> float:
        return bits_per_sample(self.numerology)

    def build_operator(self) -> UwCeOperator:
        if self.bem is None:
            raise ConfigurationError("A BEM configuration is required to build the CE operator")
        self.operator = build_uw_ce_operator(self.numerology, self.pilot, self.bem)
        return self.operator

    def _frame(self, symbols: np.ndarray) -> np.ndarray:
        n = self.numerology
        symbols = np.asarray(symbols, dtype=complex).reshape(-1)
        if symbols.size != n.M * n.N:
            raise DimensionError(f"Frame holds {n.M * n.N} data symbols, got {symbols.size}")
        D = np.zeros((n.M, n.N), dtype=complex)
        D[self.data_mask] = symbols
        return tx_data_frame(D, self.precoder, n)

    def transmit_data(self, symbols: np.ndarray) -> np.ndarray:
        return self._frame(symbols).reshape(-1, order="F")

    def transmit(self, symbols: np.ndarray) -> np.ndarray:
        return self.transmit_data(symbols) + self.pilot.stream()

    def pilot_stream(self) -> np.ndarray:
        return self.pilot.stream()

    def perfect_ecms(self, channel: ChannelRealization) -> EcmSet:
        return EcmSet(perfect_ecms_uw(channel, self.precoder, self.numerology)[:, self.rows, :])

    def receive(
        self,
        r: np.ndarray,
        sigma_w_sq: float,
        csi: CsiMode,
        channel: ChannelRealization | None = None,
        pilot_interference: np.ndarray | None = None,
    ) -> ReceiverOutput:
        if csi is CsiMode.ESTIMATED and self.operator is None:
            self.build_operator()
        return rx_pipeline_uw(
            r,
            self.operator,
            self.precoder,
            self.numerology,
            self.bem,
            sigma_w_sq,
            csi,
            tensors=self.tensors,
            channel=channel,
            pilot_interference=pilot_interference,
            pilot=self.pilot,
        )


__all__ = [
    "UwPrecoder",
    "UwPilot",
    "UwEcmTensors",
    "UwOtfsModem",
    "active_subcarriers",
    "build_precoder",
    "tx_data_frame",
    "uw_pilot",
    "extract_ce",
    "build_uw_ce_operator",
    "estimate_bem_uw",
    "perfect_ecm_uw",
    "perfect_ecms_uw",
    "wigner_uw",
    "build_uw_ecm_tensors",
    "reconstruct_ecm_uw",
    "estimated_pilot_response",
    "rx_pipeline_uw",
]
