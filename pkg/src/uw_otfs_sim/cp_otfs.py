"""CP-OTFS with circular RRC pulse shaping and an embedded impulse pilot.

Stream convention: every delay block starts with its cyclic prefix, so the
useful part of block n begins at sample ``n*M_x' + M_cp``. Channel Doppler
phases refer to the stream index; the ECMs carry that block start phase.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .ce_operator import CpCeOperator
from .channel import bits_per_sample, received_power
from .detection import EcmSet, ReceiverOutput, assemble_dd, bin_indices, detect_frame
from .errors import BoundsError, ConfigurationError, DimensionError
from .models import BemConfig, ChannelRealization, CsiMode, PilotConfig, PilotKind
from .numerics import dirichlet_kernel, isft, sft
from .numerology import Numerology


@dataclass(frozen=True, slots=True)
class RrcSpectrum:
    psi: np.ndarray
    M: int
    M_alpha: int

    @property
    def Q(self) -> int:
        return self.psi.shape[0] // self.M

    @property
    def M_s(self) -> int:
        return self.M + 2 * self.M_alpha

    def allocated_bins(self) -> np.ndarray:
        """The M_s bins covered by the passband and both transition bands."""
        M_prime = self.psi.shape[0]
        upper = self.M // 2 + self.M_alpha
        return np.concatenate([np.arange(upper), np.arange(M_prime - upper, M_prime)])


def _transition(u: np.ndarray, M_alpha: int) -> np.ndarray:
    argument = 2.0 + 2.0 * np.cos(np.pi * (u + M_alpha) / (2.0 * M_alpha))
    return 0.5 * np.sqrt(np.maximum(argument, 0.0))


def rrc_spectrum(M: int, Q: int, alpha: float | None = None, M_alpha: int | None = None) -> RrcSpectrum:
    if M_alpha is None:
        if alpha is None or not 0.0 <= alpha <= 1.0:
            raise ConfigurationError(f"Roll-off must satisfy 0 <= alpha <= 1, got {alpha}")
        M_alpha = int(math.floor(alpha * M / 2 + 1e-9))
    M_prime = M * Q
    if M + 2 * M_alpha > M_prime:
        raise ConfigurationError(
            f"RRC support exceeds the grid: M + 2*M_alpha <= M*Q violated ({M + 2 * M_alpha} > {M_prime})"
        )

    half = M // 2
    psi = np.zeros(M_prime)
    if M_alpha == 0:
        psi[:half] = 1.0
        psi[M_prime - half :] = 1.0
        return RrcSpectrum(psi=psi, M=M, M_alpha=0)

    psi[: half - M_alpha] = 1.0
    psi[M_prime - half + M_alpha :] = 1.0
    u = np.arange(-M_alpha, M_alpha)
    psi[half + u] = _transition(u, M_alpha)
    psi[M_prime - half + u] = _transition(-u, M_alpha)
    return RrcSpectrum(psi=psi, M=M, M_alpha=M_alpha)


def block_start(n: Numerology, block) -> np.ndarray:
    return np.asarray(block) * n.M_x_prime + n.M_cp


def data_mask(n: Numerology) -> np.ndarray:
    mask = np.ones((n.M, n.N), dtype=bool)
    mask[: n.M_g, :] = False
    return mask


def embed_pilot(data_syms: np.ndarray, pc: PilotConfig, n: Numerology) -> np.ndarray:
    mask = data_mask(n)
    data_syms = np.asarray(data_syms, dtype=complex).reshape(-1)
    expected = int(mask.sum())
    if data_syms.size != expected:
        raise DimensionError(f"Frame holds {expected} data symbols, got {data_syms.size}")
    D = np.zeros((n.M, n.N), dtype=complex)
    D[mask] = data_syms
    if pc.kind is PilotKind.EMBEDDED_IMPULSE:
        D[pc.p0, pc.q0] = pc.amplitude
    return D


@dataclass(frozen=True, slots=True)
class CpFrame:
    S_cp: np.ndarray

    def stream(self) -> np.ndarray:
        return self.S_cp.reshape(-1, order="F")


def tx_frame(D: np.ndarray, rrc: RrcSpectrum, n: Numerology) -> CpFrame:
    X = isft(D)
    extended = X[np.arange(n.M_prime) % n.M, :]
    shaped = rrc.psi[:, None] * extended
    S = math.sqrt(n.Q) * np.fft.ifft(shaped, axis=0, norm="ortho")
    S_cp = np.vstack([S[n.M_prime - n.M_cp :, :], S]) if n.M_cp else S
    return CpFrame(S_cp=S_cp)


def wigner_rx(r: np.ndarray, n: Numerology) -> np.ndarray:
    r = np.asarray(r)
    if r.shape[0] < n.frame_length:
        raise DimensionError(f"Received stream needs {n.frame_length} samples, got {r.shape[0]}")
    blocks = r[: n.frame_length].reshape(n.N, n.M_x_prime).T
    return np.fft.fft(blocks[n.M_cp :, :], axis=0, norm="ortho")


def _ecm_kernel(rrc: RrcSpectrum, n: Numerology, delay: int, doppler: float) -> np.ndarray:
    """Block-independent part of the ECM of one path (M' x M)."""
    p = np.arange(n.M)[None, :] + n.M * np.arange(n.Q)[:, None]
    weight = rrc.psi[p] * np.exp(-2j * np.pi * p * delay / n.M_prime)
    m = np.arange(n.M_prime)
    chi = dirichlet_kernel(p[None, :, :] - m[:, None, None] + doppler, n.M_prime)
    return math.sqrt(n.Q) * np.einsum("aqk,qk->ak", chi, weight)


def perfect_ecms(ch: ChannelRealization, rrc: RrcSpectrum, n: Numerology) -> np.ndarray:
    """ECMs of all N delay blocks, shape (N, M', M)."""
    starts = block_start(n, np.arange(n.N))
    ecms = np.zeros((n.N, n.M_prime, n.M), dtype=complex)
    for gain, delay, doppler in ch.paths():
        kernel = _ecm_kernel(rrc, n, int(delay), float(doppler))
        phase = np.exp(2j * np.pi * doppler * starts / n.M_prime)
        ecms += gain * phase[:, None, None] * kernel[None, :, :]
    return ecms


def perfect_ecm(ch: ChannelRealization, rrc: RrcSpectrum, n: Numerology, block: int) -> np.ndarray:
    start = float(block_start(n, block))
    ecm = np.zeros((n.M_prime, n.M), dtype=complex)
    for gain, delay, doppler in ch.paths():
        phase = np.exp(2j * np.pi * doppler * start / n.M_prime)
        ecm += gain * phase * _ecm_kernel(rrc, n, int(delay), float(doppler))
    return ecm


def rx_filter_alias(Y: np.ndarray, rrc: RrcSpectrum) -> np.ndarray:
    M = rrc.M
    shaped = rrc.psi[:, None] * np.asarray(Y)
    return shaped.reshape(rrc.Q, M, -1).sum(axis=0)


def extract_ce_region(D_hat: np.ndarray, n: Numerology) -> np.ndarray:
    if n.m_ce < 0 or n.m_ce + n.M_ce > D_hat.shape[0]:
        raise BoundsError(f"CE region rows [{n.m_ce}, {n.m_ce + n.M_ce}) exceed {D_hat.shape[0]} delay bins")
    return D_hat[n.m_ce : n.m_ce + n.M_ce, :]


def _bem_dopplers(n: Numerology, bem: BemConfig) -> np.ndarray:
    return bem.V * n.M_prime / (bem.n_nu * n.N * n.M_x_prime)


def build_cp_ce_operator(n: Numerology, pc: PilotConfig, bem: BemConfig, rrc: RrcSpectrum) -> CpCeOperator:
    """Response of the extracted CE region to every unit BEM coefficient.

    Only the pilot symbol is assumed present. Column index is kτ + M_h·kν,
    row index m + M_ce·n over the extracted rows.
    """
    if pc.kind is not PilotKind.EMBEDDED_IMPULSE:
        raise ConfigurationError("CP channel estimation requires the embedded impulse pilot")
    M, N, Q, M_prime, M_h = n.M, n.N, n.Q, n.M_prime, n.M_h
    V = bem.V
    xi = _bem_dopplers(n, bem)
    x0 = pc.amplitude

    p = np.arange(M_prime)
    pilot_phase = np.exp(-2j * np.pi * (p % M) * pc.p0 / M)
    delay_phase = np.exp(-2j * np.pi * np.outer(np.arange(M_h), p) / M_prime)
    tx_weights = (rrc.psi * pilot_phase)[None, :] * delay_phase
    doppler_rows = np.arange(N)

    A_bar = np.zeros((M, N, M_h, N), dtype=complex)
    for kv in range(N):
        coupling = dirichlet_kernel(p[None, :] - p[:, None] + xi[kv], M_prime)
        received = rrc.psi[None, :] * (tx_weights @ coupling.T)
        aliased = received.reshape(M_h, Q, M).sum(axis=1)
        delay_profile = M * np.fft.ifft(aliased, axis=1)
        doppler_profile = dirichlet_kernel(pc.q0 - doppler_rows + V[kv] / bem.n_nu, N)
        origin = np.exp(2j * np.pi * V[kv] * n.M_cp / (bem.n_nu * N * n.M_x_prime))
        scale = x0 * math.sqrt(Q) / M * origin
        A_bar[:, :, :, kv] = scale * delay_profile.T[:, None, :] * doppler_profile[None, :, None]

    region = A_bar[n.m_ce : n.m_ce + n.M_ce]
    A_ce = region.reshape(n.M_ce * N, M_h * N, order="F")
    return CpCeOperator.from_matrix(A_ce, M_h, N, leakage=data_leakage_ratio(n, pc, rrc))


def data_leakage_ratio(n: Numerology, pc: PilotConfig, rrc: RrcSpectrum) -> float:
    """Mean data power landing on one CE sample, per unit received signal power.

    Averages unit-gain, zero-Doppler paths over every oversampled delay in
    [0, L'-1] with unit-variance symbols on all data bins. Fractional delays
    spread each symbol along the delay axis; the guard rows set how much of
    that reaches the extracted region.
    """
    M, Q, M_prime = n.M, n.Q, n.M_prime
    taps = np.arange(n.L_prime)
    p = np.arange(M_prime)
    received = (rrc.psi**2)[None, :] * np.exp(-2j * np.pi * np.outer(taps, p) / M_prime)
    aliased = received.reshape(taps.size, Q, M).sum(axis=1)
    power = np.abs(math.sqrt(Q) * np.fft.ifft(aliased, axis=1)) ** 2

    ce_rows = n.m_ce + np.arange(n.M_ce)
    data_rows = np.flatnonzero(data_mask(n)[:, 0])
    offsets = (ce_rows[:, None] - data_rows[None, :]) % M
    leak = float(power[:, offsets].sum(axis=2).mean())

    impulse = np.zeros((M, n.N), dtype=complex)
    impulse[0, 0] = 1.0
    symbol_energy = float(np.sum(np.abs(tx_frame(impulse, rrc, n).stream()) ** 2))
    symbols = float(data_mask(n).sum())
    if pc.kind is PilotKind.EMBEDDED_IMPULSE:
        symbols += pc.amplitude**2
    return leak * n.frame_length / (symbol_energy * symbols)


def estimate_bem(
    Y_ce: np.ndarray,
    op: CpCeOperator,
    sigma_w_sq: float,
    received_power: float = 0.0,
) -> np.ndarray:
    """LMMSE GCE-BEM estimate; data leakage counts as noise scaled by received_power."""
    return op.estimate(Y_ce, sigma_w_sq, received_power)


@dataclass(frozen=True, slots=True)
class CpEcmTensors:
    delay_phase: np.ndarray  # (M, M_h, Q)
    kernel: np.ndarray  # (M_b, M, N, Q)
    doppler: np.ndarray  # (N blocks, N bases)


def build_cp_ecm_tensors(n: Numerology, rrc: RrcSpectrum, bem: BemConfig) -> CpEcmTensors:
    M, N, Q, M_prime = n.M, n.N, n.Q, n.M_prime
    p = np.arange(M)[:, None] + M * np.arange(Q)[None, :]
    delay_phase = np.exp(-2j * np.pi * p[:, None, :] * np.arange(n.M_h)[None, :, None] / M_prime)

    rows = bin_indices(M_prime, n.M_b)
    xi = _bem_dopplers(n, bem)
    offsets = p[None, :, None, :] - rows[:, None, None, None] + xi[None, None, :, None]
    kernel = rrc.psi[p][None, :, None, :] * dirichlet_kernel(offsets, M_prime)

    starts = block_start(n, np.arange(N))
    doppler = np.exp(2j * np.pi * np.outer(starts, bem.V) / (bem.n_nu * N * n.M_x_prime))
    return CpEcmTensors(delay_phase=delay_phase, kernel=kernel, doppler=doppler)


def reconstruct_ecm_cp(
    H_ce_est: np.ndarray,
    n: Numerology,
    bem: BemConfig,
    block: int,
    tensors: CpEcmTensors,
) -> np.ndarray:
    """Estimated ECM of one block, restricted to the M_b detection rows."""
    weighted = np.einsum("tv,mtk->mvk", H_ce_est, tensors.delay_phase)
    return math.sqrt(n.Q) * np.einsum("v,amvk,mvk->am", tensors.doppler[block], tensors.kernel, weighted)


def rx_pipeline_cp(
    r: np.ndarray,
    op: CpCeOperator | None,
    n: Numerology,
    pc: PilotConfig,
    bem: BemConfig | None,
    sigma_w_sq: float,
    csi: CsiMode,
    rrc: RrcSpectrum,
    tensors: CpEcmTensors | None = None,
    channel: ChannelRealization | None = None,
    pilot_interference: np.ndarray | None = None,
) -> ReceiverOutput:
    rows = bin_indices(n.M_prime, n.M_b)
    Y = wigner_rx(r, n)
    H_ce = None

    if csi is CsiMode.ESTIMATED:
        if op is None or bem is None:
            raise ConfigurationError("Estimated CSI needs a CE operator and a BEM configuration")
        if tensors is None:
            tensors = build_cp_ecm_tensors(n, rrc, bem)
        D_hat = sft(rx_filter_alias(Y, rrc))
        H_ce = estimate_bem(extract_ce_region(D_hat, n), op, sigma_w_sq, received_power(r, n, sigma_w_sq))
        matrices = np.stack([reconstruct_ecm_cp(H_ce, n, bem, block, tensors) for block in range(n.N)])
    else:
        if channel is None:
            raise ConfigurationError("Perfect CSI needs the channel realization")
        matrices = perfect_ecms(channel, rrc, n)[:, rows, :]
    ecms = EcmSet(matrices)

    if pilot_interference is not None:
        Y = wigner_rx(np.asarray(r) - pilot_interference, n)
    X_tilde = detect_frame(Y[rows, :], ecms, sigma_w_sq)
    return ReceiverOutput(symbols=assemble_dd(X_tilde), ecms=ecms, H_ce=H_ce)


class CpOtfsModem:
    def __init__(
        self,
        numerology: Numerology,
        pilot: PilotConfig,
        bem: BemConfig | None = None,
        operator: CpCeOperator | None = None,
    ) -> None:
        if not numerology.is_cp:
            raise ConfigurationError("CP-OTFS modem requires a CP numerology")
        self.numerology = numerology
        self.pilot = pilot
        self.bem = bem
        self.rrc = rrc_spectrum(numerology.M, numerology.Q, M_alpha=numerology.M_alpha)
        self.rows = bin_indices(numerology.M_prime, numerology.M_b)
        self.operator = operator
        self.tensors = build_cp_ecm_tensors(numerology, self.rrc, bem) if bem is not None else None

    @property
    def data_mask(self) -> np.ndarray:
        return data_mask(self.numerology)

    @property
    def block_length(self) -> int:
        return self.numerology.M_x_prime

    @property
    def bits_per_sample(self) -> float:
        return bits_per_sample(self.numerology)

    def build_operator(self) -> CpCeOperator:
        if self.bem is None:
            raise ConfigurationError("A BEM configuration is required to build the CE operator")
        self.operator = build_cp_ce_operator(self.numerology, self.pilot, self.bem, self.rrc)
        return self.operator

    def transmit(self, symbols: np.ndarray) -> np.ndarray:
        return tx_frame(embed_pilot(symbols, self.pilot, self.numerology), self.rrc, self.numerology).stream()

    def transmit_data(self, symbols: np.ndarray) -> np.ndarray:
        silent = PilotConfig(kind=PilotKind.NONE, M0=self.numerology.M0)
        return tx_frame(embed_pilot(symbols, silent, self.numerology), self.rrc, self.numerology).stream()

    def pilot_stream(self) -> np.ndarray:
        n = self.numerology
        D = np.zeros((n.M, n.N), dtype=complex)
        if self.pilot.kind is PilotKind.EMBEDDED_IMPULSE:
            D[self.pilot.p0, self.pilot.q0] = self.pilot.amplitude
        return tx_frame(D, self.rrc, n).stream()

    def perfect_ecms(self, channel: ChannelRealization) -> EcmSet:
        return EcmSet(perfect_ecms(channel, self.rrc, self.numerology)[:, self.rows, :])

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
        return rx_pipeline_cp(
            r,
            self.operator,
            self.numerology,
            self.pilot,
            self.bem,
            sigma_w_sq,
            csi,
            self.rrc,
            tensors=self.tensors,
            channel=channel,
            pilot_interference=pilot_interference,
        )


__all__ = [
    "RrcSpectrum",
    "CpFrame",
    "CpEcmTensors",
    "CpOtfsModem",
    "rrc_spectrum",
    "data_mask",
    "embed_pilot",
    "tx_frame",
    "wigner_rx",
    "perfect_ecm",
    "perfect_ecms",
    "rx_filter_alias",
    "extract_ce_region",
    "build_cp_ce_operator",
    "estimate_bem",
    "build_cp_ecm_tensors",
    "reconstruct_ecm_cp",
    "rx_pipeline_cp",
]
