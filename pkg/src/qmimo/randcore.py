"""Stream-seeded random sampling: complex Gaussians, Haar unitaries, Rayleigh channels.

Every sampler takes either an :class:`RngStream` or a ``numpy.random.Generator``.
A stream is a *recipe*: each call builds a fresh Philox generator keyed by
``SeedSequence(seed, spawn_key=(stream_id, *path))``, so the same stream always
reproduces the same draws and distinct stream ids never overlap. A bare
``Generator`` is consumed in place, which is what a trial loop wants once it
holds its own generator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack

__all__ = [
    "RngStream",
    "as_generator",
    "standard_complex_normal",
    "sample_complex_gaussian",
    "sample_haar_unitary",
    "sample_haar_operator",
    "sample_rayleigh_channel",
    "HouseholderUnitary",
    "DenseUnitary",
    "DftUnitary",
    "as_unitary",
]

RNG_ALGORITHM = "numpy Philox4x64-10, SeedSequence(seed, spawn_key=(stream_id, *path))"

_PSD_TOL = 1e-10
_RANK_CUTOFF = 1e-12


@dataclass(frozen=True)
class RngStream:
    """Reproducible, independent random stream.

    Parameters
    ----------
    seed : int
        Experiment-wide 64-bit seed.
    stream_id : int
        One id per Monte Carlo trial (or other unit of parallel work).
    path : tuple of int
        Sub-stream path for deterministic splitting, see :meth:`child`.
    """

    seed: int
    stream_id: int = 0
    path: tuple[int, ...] = field(default=())

    def __post_init__(self):
        for v in (self.seed, self.stream_id, *self.path):
            if not 0 <= int(v) < 2**64:
                raise ValueError(f"seed/stream ids must be 64-bit non-negative integers, got {v}")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id), *self.path))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, index: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id, (*self.path, int(index)))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


def standard_complex_normal(gen: np.random.Generator, shape) -> np.ndarray:
    """I.i.d. CN(0, 1) entries (real and imaginary parts each of variance 1/2)."""
    g = gen.standard_normal((*np.atleast_1d(shape), 2))
    z = g.view(np.complex128)[..., 0]
    z *= np.sqrt(0.5)
    return z


def _psd_factor(cov: np.ndarray) -> np.ndarray:
    """Return F (r x d) with F^H F = cov, dropping negligible eigen-directions."""
    cov = np.asarray(cov, dtype=complex)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError(f"covariance must be square, got shape {cov.shape}")
    if not np.allclose(cov, cov.conj().T, atol=1e-12 * max(1.0, np.abs(cov).max())):
        raise ValueError("covariance is not Hermitian")
    lam, q = np.linalg.eigh(0.5 * (cov + cov.conj().T))
    if lam.size and lam.min() < -_PSD_TOL:
        raise ValueError(f"covariance is not PSD: smallest eigenvalue {lam.min():.3e}")
    keep = lam > _RANK_CUTOFF * max(lam.sum(), 0.0)
    # row z = g @ (sqrt(lam) * q^T)  =>  E[z^T z^*] = q diag(lam) q^H
    return np.sqrt(lam[keep])[:, None] * q[:, keep].T


def sample_complex_gaussian(rows: int, cols: int, covariance, rng) -> np.ndarray:
    """Draw ``rows`` i.i.d. rows from CN(0, covariance).

    Rank-deficient covariances are sampled on their range only, so a rank-1
    covariance yields rows that are random scalar multiples of one vector.
    """
    factor = _psd_factor(covariance)
    if factor.shape[1] != cols:
        raise ValueError(f"covariance is {factor.shape[1]}x{factor.shape[1]}, expected {cols}x{cols}")
    gen = as_generator(rng)
    if factor.shape[0] == 0:
        return np.zeros((rows, cols), dtype=complex)
    g = standard_complex_normal(gen, (rows, factor.shape[0]))
    return g @ factor


def sample_haar_unitary(n: int, rng) -> np.ndarray:
    """Dense Haar-distributed ``n x n`` unitary via QR of a Ginibre matrix.

    The naive Q factor is not Haar; column j is rotated by conj(R_jj)/|R_jj|.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    gen = as_generator(rng)
    q, r = np.linalg.qr(standard_complex_normal(gen, (n, n)))
    d = np.diagonal(r)
    return q * (d.conj() / np.abs(d))[None, :]


class HouseholderUnitary:
    """Haar unitary held as a product of N random Householder reflections.

    Draws the reflector for column k from a fresh Gaussian vector of length
    N - k (Stewart's construction). This is the distribution of QR-of-Ginibre
    with the R-diagonal phase fix, but applying V or V^H to an N x d block
    costs O(N^2 d) instead of the O(N^3) factorization.
    """

    def __init__(self, reflectors: np.ndarray, tau: np.ndarray, phases: np.ndarray):
        self._a = reflectors
        self._tau = tau
        self._phases = phases
        self.n = reflectors.shape[0]

    @classmethod
    def sample(cls, n: int, rng) -> "HouseholderUnitary":
        if n < 1:
            raise ValueError("n must be >= 1")
        gen = as_generator(rng)
        g = np.tril(standard_complex_normal(gen, (n, n)))
        # norm of g[k:, k] for every k
        tail = np.sqrt(np.cumsum((np.abs(g) ** 2)[::-1], axis=0)[::-1])
        norms = np.diagonal(tail).copy()
        head = np.diagonal(g).copy()
        unit = np.where(head != 0, head / np.where(head != 0, np.abs(head), 1.0), 1.0)
        v0 = head + unit * norms
        a = g / v0[None, :]
        np.fill_diagonal(a, 1.0)
        vnorm2 = np.sum(np.abs(a) ** 2, axis=0)
        tau = (2.0 / vnorm2).astype(complex)
        # reflector maps g[k:, k] to r_kk e_1 with r_kk = -unit*norm; phase fix conj(r)/|r|
        phases = -unit.conj()
        return cls(np.asfortranarray(a), tau, phases)

    def _unmqr(self, trans: str, c: np.ndarray) -> np.ndarray:
        c = np.asfortranarray(np.asarray(c, dtype=complex))
        lwork = max(1, c.shape[1] * 64)
        out, _, info = lapack.zunmqr("L", trans, self._a, self._tau, c, lwork)
        if info != 0:
            raise RuntimeError(f"zunmqr failed with info={info}")
        return out

    def apply(self, x: np.ndarray) -> np.ndarray:
        """V @ x."""
        x = np.asarray(x, dtype=complex)
        vec = x.ndim == 1
        x2 = x.reshape(self.n, -1)
        out = self._unmqr("N", self._phases[:, None] * x2)
        return out.ravel() if vec else out

    def apply_adjoint(self, x: np.ndarray) -> np.ndarray:
        """V^H @ x."""
        x = np.asarray(x, dtype=complex)
        vec = x.ndim == 1
        out = self._phases.conj()[:, None] * self._unmqr("C", x.reshape(self.n, -1))
        return out.ravel() if vec else out

    def to_dense(self) -> np.ndarray:
        return self.apply(np.eye(self.n, dtype=complex))


class DenseUnitary:
    def __init__(self, matrix: np.ndarray):
        self.matrix = np.asarray(matrix, dtype=complex)
        self.n = self.matrix.shape[0]

    def apply(self, x):
        return self.matrix @ x

    def apply_adjoint(self, x):
        return self.matrix.conj().T @ x

    def to_dense(self):
        return self.matrix


class DftUnitary:
    """Orthonormal DFT: V^H maps frequency to time (IFFT), V maps back (FFT)."""

    def __init__(self, n: int):
        self.n = n

    def apply(self, x):
        return np.fft.fft(x, axis=0, norm="ortho")

    def apply_adjoint(self, x):
        return np.fft.ifft(x, axis=0, norm="ortho")

    def to_dense(self):
        return self.apply(np.eye(self.n, dtype=complex))


def as_unitary(v):
    if hasattr(v, "apply") and hasattr(v, "apply_adjoint"):
        return v
    return DenseUnitary(v)


def sample_haar_operator(n: int, rng) -> HouseholderUnitary:
    return HouseholderUnitary.sample(n, rng)


def sample_rayleigh_channel(n_r: int, n_t: int, rng) -> np.ndarray:
    """I.i.d. CN(0, 1) channel matrix of shape ``(n_r, n_t)``."""
    if n_r < 1 or n_t < 1:
        raise ValueError("channel dimensions must be >= 1")
    return standard_complex_normal(as_generator(rng), (n_r, n_t))
