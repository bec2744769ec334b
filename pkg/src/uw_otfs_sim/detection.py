from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .errors import BoundsError, ConfigurationError, ContractViolation, DimensionError
from .numerics import regularized_lmmse, sft

SUPPORTED_QAM_ORDERS = (4, 16, 64)


def bin_indices(M_prime: int, M_b: int) -> np.ndarray:
    """Detection bins: the lowest and highest FT bins around DC."""
    if not 1 <= M_b <= M_prime:
        raise BoundsError(f"Detection bins must satisfy 1 <= M_b <= M' (M_b={M_b}, M'={M_prime})")
    if M_b % 2 == 0:
        low, high = M_b // 2, M_b // 2
    else:
        low, high = (M_b + 1) // 2, (M_b - 1) // 2
    return np.concatenate([np.arange(low), np.arange(M_prime - high, M_prime)]).astype(int)


def reduce_bins(v: np.ndarray, M_b: int) -> np.ndarray:
    v = np.asarray(v)
    return v[bin_indices(v.shape[0], M_b)]


def lmmse_detect(y_reduced: np.ndarray, H_reduced: np.ndarray, sigma_w_sq: float) -> np.ndarray:
    return regularized_lmmse(H_reduced, sigma_w_sq) @ y_reduced


def detect_frame(Y_reduced: np.ndarray, ecms: "EcmSet", sigma_w_sq: float) -> np.ndarray:
    """Per-block LMMSE over the columns of the M_b x N reduced FT matrix."""
    columns = [lmmse_detect(Y_reduced[:, block], ecms[block], sigma_w_sq) for block in range(ecms.N)]
    return np.stack(columns, axis=1)


def assemble_dd(x_blocks: np.ndarray) -> np.ndarray:
    """Stack per-block FT estimates (columns) and return F_M^H · X · F_N."""
    return sft(np.asarray(x_blocks))


def _gray_to_binary(values: np.ndarray) -> np.ndarray:
    result = values.copy()
    shift = values >> 1
    while np.any(shift):
        result ^= shift
        shift >>= 1
    return result


@dataclass(frozen=True, slots=True)
class QamMapping:
    order: int
    points: np.ndarray

    @classmethod
    def for_order(cls, order: int) -> "QamMapping":
        if order not in SUPPORTED_QAM_ORDERS:
            raise ConfigurationError(f"QAM order must be one of {SUPPORTED_QAM_ORDERS}, got {order}")
        bits = int(math.log2(order))
        side = int(math.isqrt(order))
        half = bits // 2
        index = np.arange(order)
        i_level = _gray_to_binary(index >> half)
        q_level = _gray_to_binary(index & (side - 1))
        amplitude_i = 2 * i_level - (side - 1)
        amplitude_q = 2 * q_level - (side - 1)
        scale = math.sqrt(2.0 * (order - 1) / 3.0)
        points = (amplitude_i + 1j * amplitude_q) / scale
        return cls(order=order, points=points)

    @property
    def bits_per_symbol(self) -> int:
        return int(math.log2(self.order))

    def _weights(self) -> np.ndarray:
        return 1 << np.arange(self.bits_per_symbol - 1, -1, -1)

    def map(self, bits: np.ndarray) -> np.ndarray:
        bits = np.asarray(bits, dtype=int)
        k = self.bits_per_symbol
        if bits.size % k:
            raise DimensionError(f"Bit count {bits.size} is not a multiple of {k}")
        index = bits.reshape(-1, k) @ self._weights()
        return self.points[index]

    def decide(self, symbols: np.ndarray) -> np.ndarray:
        """Nearest constellation index; ties resolve to the smaller index."""
        symbols = np.asarray(symbols).reshape(-1)
        distances = np.abs(symbols[:, None] - self.points[None, :]) ** 2
        return np.argmin(distances, axis=1)

    def unpack(self, index: np.ndarray) -> np.ndarray:
        shifts = np.arange(self.bits_per_symbol - 1, -1, -1)
        return ((np.asarray(index)[:, None] >> shifts) & 1).reshape(-1)


def demap(D_tilde: np.ndarray, mapping: QamMapping, mask: np.ndarray) -> np.ndarray:
    """Hard-decision bits of the data bins (row-major order of ``mask``)."""
    return mapping.unpack(mapping.decide(np.asarray(D_tilde)[mask]))


@dataclass(frozen=True, slots=True)
class EcmSet:
    matrices: np.ndarray

    def __post_init__(self) -> None:
        if self.matrices.ndim != 3:
            raise DimensionError(f"ECM set must be N x M_b x M, got shape {self.matrices.shape}")

    @property
    def N(self) -> int:
        return self.matrices.shape[0]

    def __getitem__(self, block: int) -> np.ndarray:
        return self.matrices[block]


@dataclass(frozen=True, slots=True)
class ReceiverOutput:
    symbols: np.ndarray
    ecms: EcmSet
    H_ce: np.ndarray | None = None


def nmse(perfect: EcmSet, estimated: EcmSet) -> float:
    if perfect.matrices.shape != estimated.matrices.shape:
        raise DimensionError(
            f"ECM sets differ in shape: {perfect.matrices.shape} vs {estimated.matrices.shape}"
        )
    total = 0.0
    for block in range(perfect.N):
        reference = np.linalg.norm(perfect[block]) ** 2
        if reference == 0:
            raise ContractViolation(f"Perfect ECM of block {block} has zero norm; NMSE is undefined")
        total += np.linalg.norm(estimated[block] - perfect[block]) ** 2 / reference
    return float(total / perfect.N)


__all__ = [
    "SUPPORTED_QAM_ORDERS",
    "bin_indices",
    "reduce_bins",
    "lmmse_detect",
    "detect_frame",
    "assemble_dd",
    "QamMapping",
    "demap",
    "EcmSet",
    "ReceiverOutput",
    "nmse",
]
