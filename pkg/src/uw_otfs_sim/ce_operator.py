"""Offline channel-estimation operator shared by both modems.

The operator maps vectorized BEM coefficients (index kτ + M_h·kν) to the
vectorized CE observation. Only the pilot and the numerology enter it, so it
is built once and reused for every frame.

Anything the pilot model does not explain (AWGN, data leaking into the CE
region) is treated as white noise: its power per CE sample, times the row
count, is the LMMSE regularization γ. The data part is stored as a ratio to
the received signal power so it follows the channel gain of each frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .numerics import EigenFactors, hermitian_eig, unvectorize, vectorize

# γ never drops below this share of the largest eigenvalue of A A^H.
GAMMA_FLOOR_RATIO = 1e-13


@dataclass(frozen=True, slots=True)
class CeOperator:
    A_ce: np.ndarray
    eig: EigenFactors
    AhQ: np.ndarray
    M_h: int
    N: int
    leakage: float = 0.0

    @classmethod
    def from_matrix(cls, A_ce: np.ndarray, M_h: int, N: int, leakage: float = 0.0) -> "CeOperator":
        if A_ce.shape[1] != M_h * N:
            raise DimensionError(f"CE operator needs {M_h * N} columns, got {A_ce.shape[1]}")
        if leakage < 0:
            raise DimensionError(f"Leakage ratio must be >= 0, got {leakage}")
        eig = hermitian_eig(A_ce @ A_ce.conj().T)
        return cls(A_ce=A_ce, eig=eig, AhQ=A_ce.conj().T @ eig.eigvecs, M_h=M_h, N=N, leakage=float(leakage))

    @property
    def rows(self) -> int:
        return self.A_ce.shape[0]

    @property
    def gamma_floor(self) -> float:
        largest = float(np.max(self.eig.eigvals)) if self.eig.eigvals.size else 0.0
        return max(GAMMA_FLOOR_RATIO * largest, np.finfo(float).tiny)

    def interference(self, sigma_w_sq: float, received_power: float = 0.0) -> float:
        """Unmodeled power per CE sample: AWGN plus data leakage."""
        return float(sigma_w_sq) + self.leakage * max(float(received_power), 0.0)

    def regularization(self, sigma_w_sq: float, received_power: float = 0.0) -> float:
        return max(self.interference(sigma_w_sq, received_power) * self.rows, self.gamma_floor)

    def estimate(self, Y_ce: np.ndarray, sigma_w_sq: float, received_power: float = 0.0) -> np.ndarray:
        """A^H Q (Λ + γI)^-1 Q^H y, returned as an M_h x N coefficient matrix."""
        y = vectorize(Y_ce)
        if y.size != self.rows:
            raise DimensionError(f"CE observation has {y.size} entries, operator expects {self.rows}")
        gamma = self.regularization(sigma_w_sq, received_power)
        projected = self.eig.eigvecs.conj().T @ y
        h = self.AhQ @ (projected / (self.eig.eigvals + gamma))
        return unvectorize(h, self.M_h, self.N)

    def to_arrays(self) -> dict[str, np.ndarray]:
        return {
            "A_ce": self.A_ce,
            "eigvecs": self.eig.eigvecs,
            "eigvals": self.eig.eigvals,
            "AhQ": self.AhQ,
            "shape": np.array([self.M_h, self.N]),
            "leakage": np.array(self.leakage),
        }

    @classmethod
    def from_arrays(cls, arrays: dict[str, np.ndarray]) -> "CeOperator":
        M_h, N = (int(value) for value in arrays["shape"])
        return cls(
            A_ce=np.asarray(arrays["A_ce"]),
            eig=EigenFactors(eigvecs=np.asarray(arrays["eigvecs"]), eigvals=np.asarray(arrays["eigvals"])),
            AhQ=np.asarray(arrays["AhQ"]),
            M_h=M_h,
            N=N,
            leakage=float(arrays["leakage"]),
        )


class CpCeOperator(CeOperator):
    __slots__ = ()


class UwCeOperator(CeOperator):
    __slots__ = ()


__all__ = ["GAMMA_FLOOR_RATIO", "CeOperator", "CpCeOperator", "UwCeOperator"]
