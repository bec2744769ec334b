"""Unitary transforms, the Dirichlet kernel and small linear-algebra helpers.

All DFTs are unitary (scaled by 1/sqrt(n)); no other module rescales them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ContractViolation, DimensionError, SingularSystemError

DIRICHLET_SINGULAR_TOL = 1e-12
HERMITIAN_TOL = 1e-10
EIGEN_CLIP_TOL = 1e-10


@dataclass(frozen=True, slots=True)
class EigenFactors:
    eigvecs: np.ndarray
    eigvals: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.eigvecs * self.eigvals) @ self.eigvecs.conj().T


def unitary_dft_matrix(n: int) -> np.ndarray:
    if n < 1:
        raise DimensionError(f"DFT size must be >= 1, got {n}")
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def isft(D: np.ndarray) -> np.ndarray:
    """F_M · D · F_N^H (delay-Doppler to frequency-time)."""
    return np.fft.fft(np.fft.ifft(D, axis=1, norm="ortho"), axis=0, norm="ortho")


def sft(Y: np.ndarray) -> np.ndarray:
    """F_M^H · Y · F_N, the exact inverse of :func:`isft`."""
    return np.fft.fft(np.fft.ifft(Y, axis=0, norm="ortho"), axis=1, norm="ortho")


def dirichlet_kernel(z, n: int):
    """(1/n) * sum_{k<n} exp(j2πkz/n), vectorized over ``z``.

    The closed form is used where |sin(πz/n)| exceeds the singular tolerance,
    the limit value 1 elsewhere.
    """
    if n < 1:
        raise DimensionError(f"Dirichlet kernel order must be >= 1, got {n}")
    z = np.asarray(z, dtype=float)
    denom = np.sin(np.pi * z / n)
    singular = np.abs(denom) <= DIRICHLET_SINGULAR_TOL
    safe = np.where(singular, 1.0, denom)
    value = np.exp(1j * np.pi * z * (n - 1) / n) * np.sin(np.pi * z) / (n * safe)
    result = np.where(singular, 1.0 + 0.0j, value)
    if result.ndim == 0:
        return complex(result)
    return result


def hermitian_eig(A: np.ndarray) -> EigenFactors:
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"Eigendecomposition needs a square matrix, got shape {A.shape}")
    scale = max(1.0, float(np.linalg.norm(A)))
    if np.linalg.norm(A - A.conj().T) > HERMITIAN_TOL * scale:
        raise ContractViolation("Eigendecomposition input is not Hermitian")

    eigvals, eigvecs = scipy.linalg.eigh(A)
    order = np.argsort(-eigvals, kind="stable")
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    # PSD repair
    clip = (eigvals < 0.0) & (eigvals >= -EIGEN_CLIP_TOL * scale)
    eigvals = np.where(clip, 0.0, eigvals)
    return EigenFactors(eigvecs=eigvecs, eigvals=eigvals)


def regularized_lmmse(H: np.ndarray, noise_var: float) -> np.ndarray:
    """(H^H H + noise_var·I)^-1 H^H through a Cholesky factorization."""
    H = np.asarray(H)
    m, n = H.shape
    if m < n:
        raise DimensionError(f"LMMSE needs a tall system (m >= n), got {m}x{n}")
    if noise_var < 0:
        raise DimensionError(f"Noise variance must be >= 0, got {noise_var}")

    Hh = H.conj().T
    gram = Hh @ H + noise_var * np.eye(n)
    try:
        factor = scipy.linalg.cho_factor(gram, lower=False, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise SingularSystemError(f"LMMSE normal equations are singular (noise_var={noise_var})") from exc
    return scipy.linalg.cho_solve(factor, Hh, check_finite=False)


def null_space_basis(A: np.ndarray) -> np.ndarray:
    """Orthonormal basis of {x : Ax = 0}.

    Columns come from the trailing right singular vectors, so they follow
    ascending singular value. Each column is rotated so that its first
    nonzero entry is real and positive.
    """
    A = np.asarray(A)
    m, n = A.shape
    if m >= n:
        raise DimensionError(f"Null-space basis expects a wide matrix (m < n), got {m}x{n}")

    _, s, Vh = scipy.linalg.svd(A, full_matrices=True)
    s_max = float(s[0]) if s.size else 0.0
    tol = max(m, n) * np.finfo(float).eps * s_max
    rank = int(np.count_nonzero(s > tol)) if s_max > 0.0 else 0
    basis = Vh[rank:].conj().T.astype(complex)

    for col in range(basis.shape[1]):
        nonzero = np.flatnonzero(np.abs(basis[:, col]) > 1e-12)
        if nonzero.size:
            lead = basis[nonzero[0], col]
            basis[:, col] *= np.conj(lead) / abs(lead)
    return basis


def vectorize(M: np.ndarray) -> np.ndarray:
    """Column stacking: index p = row + rows * col."""
    return np.asarray(M).reshape(-1, order="F")


def unvectorize(v: np.ndarray, m: int, n: int) -> np.ndarray:
    v = np.asarray(v)
    if v.size != m * n:
        raise DimensionError(f"Cannot unvectorize {v.size} entries into {m}x{n}")
    return v.reshape((m, n), order="F")


__all__ = [
    "EigenFactors",
    "unitary_dft_matrix",
    "isft",
    "sft",
    "dirichlet_kernel",
    "hermitian_eig",
    "regularized_lmmse",
    "null_space_basis",
    "vectorize",
    "unvectorize",
]
