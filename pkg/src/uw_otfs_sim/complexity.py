"""Complex-multiplication and memory counts for one frame.

All counts are integers. Cubic terms of the Cholesky inverse use the floor
of M^3/6.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
import math

from .errors import ConfigurationError
from .numerology import Numerology


@dataclass(frozen=True, slots=True)
class ComplexityReport:
    system: str
    M_b: int
    tx: int
    omega_ce: int
    h_ce: int
    h_n: int
    omega_n: int
    rx_total: int
    mem_tx: int
    mem_a_ce: int
    mem_omega_ce: int
    mem_tensors: int
    mem_h_n: int
    mem_omega_n: int

    def to_dict(self) -> dict[str, int | str]:
        return asdict(self)

    def computation_rows(self) -> list[tuple[str, int]]:
        return [
            ("Tx side", self.tx),
            ("Omega_ce", self.omega_ce),
            ("H_ce", self.h_ce),
            ("H_n", self.h_n),
            ("Omega_n", self.omega_n),
            ("Rx side", self.rx_total),
        ]

    def memory_rows(self) -> list[tuple[str, int]]:
        return [
            ("Tx side", self.mem_tx),
            ("A_ce", self.mem_a_ce),
            ("Omega_ce", self.mem_omega_ce),
            ("Tensors", self.mem_tensors),
            ("H_n", self.mem_h_n),
            ("Omega_n", self.mem_omega_n),
        ]


def _log2(value: int) -> int:
    exponent = int(math.log2(value))
    if 1 << exponent != value:
        raise ConfigurationError(f"Transform length must be a power of two, got {value}")
    return exponent


def fft_cost(length: int) -> int:
    return length * _log2(length) // 2


def sft_cost(M: int, N: int) -> int:
    return fft_cost(M * N)


def cholesky_inverse_cost(M: int, M_b: int) -> int:
    return M_b * M * (M + 1) // 2 + M**3 // 6 + M * M * M_b + M * M_b


def complexity(n: Numerology, detection_bins: int | None = None) -> ComplexityReport:
    M, N, Q = n.M, n.N, n.Q
    M_b = n.M_b if detection_bins is None else int(detection_bins)
    if not M <= M_b <= n.M_prime:
        raise ConfigurationError(f"Detection bins must satisfy M <= M_b <= M' (M_b={M_b}, M={M}, M'={n.M_prime})")
    M_h = n.M_h
    M_ce = n.M_ce_effective

    c_sft = sft_cost(M, N)
    c_fft = fft_cost(n.M_prime)

    omega_ce = M_h * M_ce**2 * N**3 + M_ce**2 * N**2 // 2 + M_ce * N // 4
    h_ce = M_h**2 * N**2
    omega_n = N * cholesky_inverse_cost(M, M_b)

    if n.is_cp:
        tx = c_sft + M * Q * N // 2 + N * c_fft
        h_n = M * N * ((M_h + M_b) * Q + M_b * N)
        # filter + alias, CE-region SFT, then reduced-bin matched filtering and the final SFT
        rx_total = omega_ce + h_ce + h_n + omega_n + N * c_fft + n.M_prime * N // 2 + c_sft + M_b * M * N + c_sft
        mem_tx = M * N + M * Q
        mem_tensors = M_b * M * N * Q + M_h * M * Q + N**2
    else:
        tx = c_sft + n.M_s * M * N + N * c_fft
        h_n = M_b * N * (M_h + 2 * M * N)
        rx_total = omega_ce + h_ce + h_n + omega_n + N * c_fft + M_b * M * N + c_sft
        mem_tx = M * N + n.M_s * M + n.M_prime * N
        mem_tensors = M_b * M * N + M_b * M_h * N + N**2

    return ComplexityReport(
        system=n.name,
        M_b=M_b,
        tx=tx,
        omega_ce=omega_ce,
        h_ce=h_ce,
        h_n=h_n,
        omega_n=omega_n,
        rx_total=rx_total,
        mem_tx=mem_tx,
        mem_a_ce=M_h * M_ce * N**2,
        mem_omega_ce=M_h * M_ce * N**2,
        mem_tensors=mem_tensors,
        mem_h_n=M_b * M,
        mem_omega_n=M_b * M,
    )


__all__ = ["ComplexityReport", "complexity", "fft_cost", "sft_cost", "cholesky_inverse_cost"]
