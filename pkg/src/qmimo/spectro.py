"""Closed-form spectrospatial analytics built on a transmit linear model.

Sub-band m with bandwidth fraction delta_m and stream covariance P_m has the
limiting per-sample covariance ``S_m = delta_m (A P_m A^H + T)``. Power
fractions, ACLR and beam patterns follow from the S_m. Quantization noise
T is white across frequency, so no choice of P_m can push band m's power
fraction below ``delta_m Tr(T) / Tr(A P A^H + T)``.

Sub-band indices are 0-based throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._linalg import hermitize
from .linearize import LinearModel

__all__ = [
    "SubbandPlan",
    "SpectralCovarianceSet",
    "SubbandConstruction",
    "subband_covariance",
    "spectral_covariances",
    "power_fractions",
    "aclr",
    "aclr_db",
    "array_response",
    "beam_power",
    "beam_pattern",
    "ula_gram",
    "nu_floor",
    "construct_subband_covariances",
]


@dataclass(frozen=True, eq=False)
class SubbandPlan:
    """Assignment of each of N frequency bins to one of M sub-bands."""

    selection: np.ndarray
    n_bands: int | None = None

    def __post_init__(self):
        sel = np.asarray(self.selection, dtype=int)
        if sel.ndim != 1 or sel.size == 0:
            raise ValueError("selection must be a non-empty 1-D vector")
        if sel.min() < 0:
            raise ValueError("sub-band labels must be >= 0")
        m = int(sel.max()) + 1 if self.n_bands is None else int(self.n_bands)
        if sel.max() >= m:
            raise ValueError(f"label {sel.max()} out of range for {m} bands")
        object.__setattr__(self, "selection", sel)
        object.__setattr__(self, "n_bands", m)

    @classmethod
    def contiguous(cls, sizes: Sequence[int]) -> "SubbandPlan":
        """First ``sizes[0]`` bins in band 0, the next ``sizes[1]`` in band 1, ..."""
        return cls(np.repeat(np.arange(len(sizes)), sizes), len(sizes))

    @property
    def n_fft(self) -> int:
        return self.selection.size

    @property
    def fractions(self) -> np.ndarray:
        return np.bincount(self.selection, minlength=self.n_bands) / self.n_fft


@dataclass(frozen=True, eq=False)
class SpectralCovarianceSet:
    per_subband: list

    @property
    def total(self) -> np.ndarray:
        return sum(self.per_subband[1:], self.per_subband[0].copy())


@dataclass
class SubbandConstruction:
    """Result of inverting power fractions into per-band covariances.

    ``covs`` is set when feasible; otherwise ``violations`` maps each
    offending band to how far its fraction sits below the floor.
    """

    feasible: bool
    covs: list | None = None
    violations: dict = field(default_factory=dict)
    floor: np.ndarray | None = None


def subband_covariance(model: LinearModel, p_m, delta_m: float) -> np.ndarray:
    p_m = np.asarray(p_m, dtype=complex)
    a = model.gain
    if p_m.shape != (a.shape[1], a.shape[1]):
        raise ValueError(f"P_m is {p_m.shape}, model expects {(a.shape[1], a.shape[1])}")
    if not 0.0 <= delta_m <= 1.0:
        raise ValueError(f"bandwidth fraction must lie in [0, 1], got {delta_m}")
    return hermitize(delta_m * (a @ p_m @ a.conj().T + model.noise_cov))


def spectral_covariances(model: LinearModel, covs, deltas) -> SpectralCovarianceSet:
    return SpectralCovarianceSet([subband_covariance(model, p, d) for p, d in zip(covs, deltas)])


def power_fractions(s) -> np.ndarray:
    """nu_m = Tr(S_m) / Tr(S) for a covariance set or a list of S_m."""
    mats = s.per_subband if isinstance(s, SpectralCovarianceSet) else list(s)
    tr = np.array([np.real(np.trace(m)) for m in mats])
    total = tr.sum()
    if not total > 0:
        raise ValueError("total covariance has zero trace")
    return np.maximum(tr, 0.0) / total


def aclr(nu, signal_band: int = 0, adjacent_band: int = 1) -> float:
    """nu_signal / nu_adjacent; +inf when the adjacent band is empty."""
    nu = np.asarray(nu, dtype=float)
    if nu[adjacent_band] <= 0:
        return float("inf")
    return float(nu[signal_band] / nu[adjacent_band])


def aclr_db(nu, signal_band: int = 0, adjacent_band: int = 1) -> float:
    r = aclr(nu, signal_band, adjacent_band)
    return float("inf") if np.isinf(r) else float(10.0 * np.log10(r))


def array_response(n_ant: int, psi) -> np.ndarray:
    """Half-wavelength ULA response; shape (n_ant,) or (len(psi), n_ant)."""
    if n_ant < 1:
        raise ValueError("n_ant must be >= 1")
    psi = np.asarray(psi, dtype=float)
    k = np.arange(n_ant)
    return np.exp(1j * np.pi * np.multiply.outer(np.cos(psi), k))


def beam_power(s_m, psi) -> float | np.ndarray:
    """BF(psi) = e(psi)^H S_m e(psi); vectorised over ``psi``."""
    s_m = np.asarray(s_m)
    e = array_response(s_m.shape[0], psi)
    bf = np.real(np.einsum("...i,ij,...j->...", e.conj(), s_m, e))
    return np.maximum(bf, 0.0) if bf.ndim else float(max(bf, 0.0))


def beam_pattern(s_m, n_angles: int = 181) -> tuple[np.ndarray, np.ndarray]:
    """BF over ``n_angles`` evenly spaced angles from 0 to pi (1-degree grid by default).

    psi = 0 is the same direction as 2 pi, and the ULA response on (pi, 2 pi]
    mirrors this half.
    """
    psi = np.linspace(0.0, np.pi, n_angles)
    return psi, beam_power(s_m, psi)


def ula_gram(n_ant: int, n_points: int = 10_000) -> np.ndarray:
    """(1/2pi) ∫ e(psi) e(psi)^H dpsi by the periodic rectangle rule."""
    psi = 2 * np.pi * np.arange(1, n_points + 1) / n_points
    e = array_response(n_ant, psi)
    return e.T @ e.conj() / n_points


def nu_floor(model: LinearModel, p, deltas) -> np.ndarray:
    """Lower bound ``delta_m Tr(T) / Tr(A P A^H + T)`` on every power fraction."""
    deltas = np.asarray(deltas, dtype=float)
    denom = float(np.real(np.trace(model.output_cov(np.asarray(p, dtype=complex)))))
    if not denom > 0:
        raise ValueError("Tr(A P A^H + T) is zero; the floor is undefined")
    return deltas * float(np.real(np.trace(model.noise_cov))) / denom


def construct_subband_covariances(model: LinearModel, p, deltas, nu, tol: float = 1e-12) -> SubbandConstruction:
    """Per-band covariances P_m (multiples of P) realising power fractions ``nu``.

    ``P_m = P / Tr(A P A^H) * [(nu_m / delta_m) Tr(A P A^H + T) - Tr(T)]``,
    which satisfies ``sum_m delta_m P_m = P`` and reproduces ``nu`` exactly.
    Bands whose target falls below the floor are reported, not raised.
    """
    p = np.asarray(p, dtype=complex)
    deltas = np.asarray(deltas, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if nu.shape != deltas.shape:
        raise ValueError("nu and deltas must have the same length")
    if np.any(nu < 0) or abs(nu.sum() - 1.0) > 1e-9:
        raise ValueError("nu must be non-negative and sum to 1")
    signal = float(np.real(np.trace(model.gain @ p @ model.gain.conj().T)))
    if not signal > 0:
        raise ValueError("Tr(A P A^H) is zero; no covariance can steer power")
    total = signal + float(np.real(np.trace(model.noise_cov)))
    floor = nu_floor(model, p, deltas)

    violations = {}
    for m in range(nu.size):
        if deltas[m] == 0:
            if nu[m] > 0:
                violations[m] = float(nu[m])  # an empty band cannot carry power
        elif nu[m] < floor[m] - tol:
            violations[m] = float(floor[m] - nu[m])
    if violations:
        return SubbandConstruction(False, violations=violations, floor=floor)

    covs = []
    trace_t = total - signal
    for m in range(nu.size):
        if deltas[m] == 0:
            covs.append(np.zeros_like(p))
            continue
        scale = (nu[m] / deltas[m] * total - trace_t) / signal
        covs.append(max(scale, 0.0) * p)
    return SubbandConstruction(True, covs=covs, floor=floor)
