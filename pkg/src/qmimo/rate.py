"""Achievable-rate lower bound for the linearised quantized link, in bits per sample.

The end-to-end model (A, T) is treated as a Gaussian MIMO channel with gain A
and noise covariance T, giving

    R >= sum_m delta_m log2 |I + A P_m A^H T^-1|.

With no quantization this is the Shannon capacity log2 |I + H P H^H / sigma^2|.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._linalg import hermitize
from .linearize import LinearModel

__all__ = [
    "RatePoint",
    "rate_lower_bound",
    "shannon_capacity",
    "subband_capacity",
    "snr_to_noise_var",
    "REG_FLOOR",
]

REG_FLOOR = 1e-12


@dataclass(frozen=True)
class RatePoint:
    snr_db: float
    rate_bound: float
    capacity: float
    bits_dac: float | int
    bits_adc: float | int


def _log2det_eye_plus(m: np.ndarray) -> float:
    lam = np.linalg.eigvalsh(hermitize(m))
    return float(np.sum(np.log2(1.0 + np.maximum(lam, 0.0))))


def _inv_sqrt(t: np.ndarray) -> np.ndarray:
    n = t.shape[0]
    lam, q = np.linalg.eigh(hermitize(t))
    tr = float(lam.sum())
    if not tr > 0:
        raise np.linalg.LinAlgError(
            f"noise covariance is singular (smallest eigenvalue {lam.min():.3e}, trace {tr:.3e})"
        )
    lam = np.maximum(lam, REG_FLOOR * tr / n)
    return (q / np.sqrt(lam)) @ q.conj().T


def rate_lower_bound(model_rx: LinearModel, covs, deltas) -> float:
    deltas = np.asarray(deltas, dtype=float)
    if len(covs) != deltas.size:
        raise ValueError(f"{len(covs)} covariances for {deltas.size} sub-bands")
    if abs(deltas.sum() - 1.0) > 1e-9:
        raise ValueError(f"bandwidth fractions sum to {deltas.sum()}, not 1")
    w = _inv_sqrt(model_rx.noise_cov)
    b = w @ model_rx.gain
    return float(sum(d * _log2det_eye_plus(b @ np.asarray(p) @ b.conj().T) for p, d in zip(covs, deltas) if d > 0))


def shannon_capacity(h, p, noise_var: float) -> float:
    if not noise_var > 0:
        raise ValueError(f"noise variance must be positive, got {noise_var}")
    h = np.atleast_2d(np.asarray(h, dtype=complex))
    return _log2det_eye_plus(h @ np.asarray(p) @ h.conj().T / noise_var)


def subband_capacity(h, covs, deltas, noise_var: float) -> float:
    """Unquantized baseline under the same per-band covariances as the bound."""
    return float(sum(d * shannon_capacity(h, p, noise_var) for p, d in zip(covs, deltas) if d > 0))


def snr_to_noise_var(h, p, target_snr_db: float) -> float:
    """sigma^2 such that the mean per-antenna received SNR equals ``target_snr_db``."""
    h = np.atleast_2d(np.asarray(h, dtype=complex))
    signal = float(np.real(np.trace(h @ np.asarray(p) @ h.conj().T)))
    if not signal > 0:
        raise ValueError("received signal power is zero")
    return signal / (h.shape[0] * 10.0 ** (target_snr_db / 10.0))
