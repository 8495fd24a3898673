"""Small Hermitian-matrix helpers shared by the modelling modules."""

import numpy as np


def hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def psd_floor(m: np.ndarray) -> np.ndarray:
    """Hermitian part of ``m`` with negative eigenvalues clipped to zero."""
    lam, q = np.linalg.eigh(hermitize(m))
    if lam.size == 0 or lam.min() >= 0:
        return hermitize(m)
    return hermitize((q * np.maximum(lam, 0.0)) @ q.conj().T)


def psd_pinv(p: np.ndarray, cutoff: float = 1e-10):
    """Pseudo-inverse of a PSD matrix restricted to its range.

    Eigenvalues below ``cutoff * lambda_max`` are treated as zero. Returns the
    pseudo-inverse and the numerical rank.
    """
    lam, q = np.linalg.eigh(hermitize(np.asarray(p, dtype=complex)))
    top = lam.max() if lam.size else 0.0
    keep = lam > cutoff * top if top > 0 else np.zeros_like(lam, dtype=bool)
    qk = q[:, keep]
    return (qk / lam[keep]) @ qk.conj().T, int(keep.sum())


def range_projector(p: np.ndarray, cutoff: float = 1e-10) -> np.ndarray:
    lam, q = np.linalg.eigh(hermitize(np.asarray(p, dtype=complex)))
    top = lam.max() if lam.size else 0.0
    qk = q[:, lam > cutoff * top] if top > 0 else q[:, :0]
    return qk @ qk.conj().T


def rel_frobenius(est: np.ndarray, ref: np.ndarray) -> float:
    return float(np.linalg.norm(est - ref) / np.linalg.norm(ref))
