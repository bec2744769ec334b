from __future__ import annotations

import math

import numpy as np

from .errors import ConfigurationError, DimensionError
from .models import ChannelRealization, GceBemChannel
from .numerology import Numerology


def sample_channel(
    rng: np.random.Generator,
    P: int,
    L_prime: int,
    nu_max: float,
    delta_f: float,
) -> ChannelRealization:
    """Uniform-delay, Jakes-Doppler, Rayleigh-gain sparse channel."""
    if P < 1 or L_prime < 1:
        raise ConfigurationError(f"Channel needs P >= 1 and L' >= 1 (P={P}, L'={L_prime})")
    delays = rng.integers(0, L_prime, size=P)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=P)
    dopplers = (nu_max / delta_f) * np.cos(theta)
    gains = (rng.standard_normal(P) + 1j * rng.standard_normal(P)) / math.sqrt(2.0)
    return ChannelRealization(delays=delays, dopplers=dopplers, gains=gains)


def apply_ltv(s: np.ndarray, ch: ChannelRealization, M_prime: int) -> np.ndarray:
    """r[k] = sum_i h_i s[k - d_i] exp(j2π xi_i k / M'), truncated to len(s)."""
    s = np.asarray(s, dtype=complex)
    length = s.shape[0]
    k = np.arange(length)
    r = np.zeros(length, dtype=complex)
    for gain, delay, doppler in ch.paths():
        delay = int(delay)
        if delay >= length:
            continue
        shifted = np.zeros(length, dtype=complex)
        shifted[delay:] = s[: length - delay]
        r += gain * shifted * np.exp(2j * np.pi * doppler * k / M_prime)
    return r


def bem_doppler_basis(bem: GceBemChannel, length: int) -> np.ndarray:
    """N x length matrix exp(j2π V[kv] k / (n_nu N M_x'))."""
    N = bem.N
    V = np.arange(N, dtype=float) - (N - 1) / 2.0
    k = np.arange(length)
    return np.exp(2j * np.pi * np.outer(V, k) / (bem.n_nu * N * bem.M_x_prime))


def apply_gce_bem(s: np.ndarray, bem: GceBemChannel, N: int, M_h: int) -> np.ndarray:
    """Propagate s through the GCE-BEM channel, noiseless.

    r[k] = sum_{kτ < M_h} s[k - kτ] sum_{kν < N} H_ce[kτ, kν] exp(j2π V[kν] k / (n_nu N M_x')),
    truncated to len(s) like apply_ltv. N and M_h must match the shape of bem.H_ce.
    """
    if bem.H_ce.shape != (M_h, N):
        raise DimensionError(f"GCE-BEM coefficients must be {M_h}x{N}, got {bem.H_ce.shape[0]}x{bem.H_ce.shape[1]}")
    s = np.asarray(s, dtype=complex)
    length = s.shape[0]
    basis = bem_doppler_basis(bem, length)
    r = np.zeros(length, dtype=complex)
    for delay in range(min(M_h, length)):
        weights = bem.H_ce[delay] @ basis
        shifted = np.zeros(length, dtype=complex)
        shifted[delay:] = s[: length - delay]
        r += weights * shifted
    return r


def on_grid_doppler(V_value: float, n_nu: float, N: int, M_x_prime: int, M_prime: int) -> float:
    """Normalized Doppler xi whose LTV phase equals the GCE-BEM basis at offset V."""
    return V_value * M_prime / (n_nu * N * M_x_prime)


def bits_per_sample(n: Numerology) -> float:
    if n.is_cp:
        return n.k_b * (n.M * n.N - n.M0) / (n.N * n.M_prime)
    return n.k_b * n.M / n.M_prime


def awgn_variance(P_s: float, k_bps: float, ebn0_linear: float) -> float:
    if math.isinf(ebn0_linear):
        return 0.0
    if P_s <= 0 or k_bps <= 0 or ebn0_linear <= 0:
        raise ConfigurationError(
            f"AWGN variance needs positive inputs (P_s={P_s}, k_bps={k_bps}, Eb/N0={ebn0_linear})"
        )
    return P_s / (k_bps * ebn0_linear)


def received_power(r: np.ndarray, n: Numerology, sigma_w_sq: float) -> float:
    """Signal power per sample of one received frame, noise variance removed."""
    frame = np.asarray(r)[: n.frame_length]
    if frame.size == 0:
        return 0.0
    return max(float(np.mean(np.abs(frame) ** 2)) - float(sigma_w_sq), 0.0)


def add_awgn(rng: np.random.Generator, s: np.ndarray, sigma_w_sq: float) -> np.ndarray:
    if sigma_w_sq < 0:
        raise DimensionError(f"Noise variance must be >= 0, got {sigma_w_sq}")
    s = np.asarray(s, dtype=complex)
    if sigma_w_sq == 0:
        return s.copy()
    scale = math.sqrt(sigma_w_sq / 2.0)
    noise = scale * (rng.standard_normal(s.shape) + 1j * rng.standard_normal(s.shape))
    return s + noise


__all__ = [
    "ChannelRealization",
    "GceBemChannel",
    "sample_channel",
    "apply_ltv",
    "apply_gce_bem",
    "bem_doppler_basis",
    "on_grid_doppler",
    "bits_per_sample",
    "awgn_variance",
    "received_power",
    "add_awgn",
]
