"""Equivalent linear-Gaussian models (gain A, noise covariance T) of row-wise maps.

For U ~ CN(0, P) and a row map ``y = phi(u, xi)`` the model is

    A P = E[phi(U, Xi) U^H]          (Stein / Bussgang identity)
    T   = E[(phi - A U)(phi - A U)^H]

A is estimated from the cross-moment and the range-restricted pseudo-inverse
of P, never from a Jacobian: staircase quantizers have zero derivative almost
everywhere. Both moments are accumulated chunk by chunk, each chunk with its
own child stream, so the result does not depend on the worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from ._linalg import hermitize, psd_floor, psd_pinv, range_projector
from .channelmodels import ChannelSpec, apply_channel
from .quantizer import QuantizerSpec, calibrated_bank, parse_bits, quantize_columns
from .randcore import RngStream, _psd_factor, standard_complex_normal

__all__ = [
    "RowMap",
    "LinearModel",
    "estimate_linear_model",
    "make_tx_chain",
    "make_e2e_chain",
    "identity_map",
    "calibrate_dac",
    "calibrate_adc",
    "model_from_moments",
    "DEFAULT_SAMPLES",
]

DEFAULT_SAMPLES = 200_000
MIN_SAMPLES = 1_000
CHUNK = 25_000


@dataclass(frozen=True, eq=False)
class RowMap:
    """Row-separable map ``y_n = evaluate(u_n, xi_n)``, vectorised over rows.

    ``evaluate`` receives a ``(K, input_dim)`` block and a ``(K, noise_dim)``
    block (``None`` when ``noise_dim == 0``). ``linear`` optionally carries
    ``(G, N)`` when the map is exactly ``y = G u + N xi``; the estimator then
    skips Monte Carlo.
    """

    input_dim: int
    output_dim: int
    noise_dim: int
    evaluate: Callable[[np.ndarray, Optional[np.ndarray]], np.ndarray]
    linear: Optional[tuple[np.ndarray, np.ndarray]] = None

    def __call__(self, u, xi=None):
        return self.evaluate(u, xi)


@dataclass(frozen=True, eq=False)
class LinearModel:
    gain: np.ndarray
    noise_cov: np.ndarray
    input_cov: np.ndarray
    sample_count: int  # 0 for the exact linear path

    @property
    def exact(self) -> bool:
        return self.sample_count == 0

    def output_cov(self, p: np.ndarray | None = None) -> np.ndarray:
        p = self.input_cov if p is None else p
        return self.gain @ p @ self.gain.conj().T + self.noise_cov


def identity_map(dim: int) -> RowMap:
    eye = np.eye(dim, dtype=complex)
    return RowMap(dim, dim, 0, lambda u, xi: u, linear=(eye, np.zeros((dim, 0), dtype=complex)))


def _as_bank(spec, n: int) -> list[QuantizerSpec]:
    if isinstance(spec, QuantizerSpec):
        return [spec] * n
    bank = list(spec)
    if len(bank) != n:
        raise ValueError(f"expected {n} quantizers, got {len(bank)}")
    return bank


def make_tx_chain(w_tx, dac) -> RowMap:
    """``u -> W_tx Q_tx(u)``."""
    w_tx = np.atleast_2d(np.asarray(w_tx, dtype=complex))
    n_t, n_st = w_tx.shape
    bank = _as_bank(dac, n_st)

    def evaluate(u, xi=None):
        return quantize_columns(bank, u) @ w_tx.T

    linear = (w_tx, np.zeros((n_t, 0), dtype=complex)) if all(q.infinite for q in bank) else None
    return RowMap(n_st, n_t, 0, evaluate, linear)


def make_e2e_chain(w_tx, dac, h, noise_std: float, w_rx, adc) -> RowMap:
    """``u -> W_rx Q_rx(H W_tx Q_tx(u) + sigma xi)``; noise_dim = N_r."""
    w_tx = np.atleast_2d(np.asarray(w_tx, dtype=complex))
    w_rx = np.atleast_2d(np.asarray(w_rx, dtype=complex))
    channel = ChannelSpec(h, noise_std)
    if channel.n_t != w_tx.shape[0]:
        raise ValueError(f"H has {channel.n_t} columns but W_tx has {w_tx.shape[0]} rows")
    if w_rx.shape[1] != channel.n_r:
        raise ValueError(f"W_rx has {w_rx.shape[1]} columns but H has {channel.n_r} rows")
    tx = make_tx_chain(w_tx, dac)
    adc_bank = _as_bank(adc, channel.n_r)

    def evaluate(u, xi):
        y = apply_channel(channel, tx.evaluate(u), xi)
        return quantize_columns(adc_bank, y) @ w_rx.T

    linear = None
    if tx.linear is not None and all(q.infinite for q in adc_bank):
        linear = (w_rx @ channel.h @ w_tx, noise_std * w_rx)
    return RowMap(tx.input_dim, w_rx.shape[0], channel.n_r, evaluate, linear)


def _chunk_moments(phi: RowMap, factor: np.ndarray, n: int, stream: RngStream, antithetic: bool):
    gen = stream.generator()
    d = phi.input_dim
    half = (n + 1) // 2 if (antithetic and phi.noise_dim) else n
    if factor.shape[0]:
        u = standard_complex_normal(gen, (half, factor.shape[0])) @ factor
    else:
        u = np.zeros((half, d), dtype=complex)
    xi = standard_complex_normal(gen, (half, phi.noise_dim)) if phi.noise_dim else None
    if half != n:
        # (u, xi) and (u, -xi) are both exact draws; pairing them cancels
        # most of the thermal-noise variance in the cross moment
        u = np.concatenate([u, u])[:n]
        xi = np.concatenate([xi, -xi])[:n]
    y = phi.evaluate(u, xi)
    bad = ~np.all(np.isfinite(y), axis=1)
    if bad.any():
        k = int(np.argmax(bad))
        raise FloatingPointError(f"row map returned non-finite output {y[k]} for input {u[k]}")
    uc = u.conj()
    return y.T @ uc, y.T @ y.conj(), u.T @ uc


def estimate_linear_model(
    phi: RowMap,
    input_cov,
    samples: int = DEFAULT_SAMPLES,
    rng: RngStream | int = 0,
    *,
    workers: int = 1,
    antithetic: bool = True,
) -> LinearModel:
    """Monte Carlo estimate of (A, T) for ``phi`` under U ~ CN(0, input_cov).

    Parameters
    ----------
    phi : RowMap
    input_cov : (d, d) array
        PSD input covariance. A is only identified on its range; columns of
        A acting on the null space are zero.
    samples : int
        Number of (U, Xi) draws, at least 1000.
    rng : RngStream or int
        Base stream; chunk i uses ``rng.child(i)``.
    workers : int
        Threads used for chunk evaluation. Results are identical for any value.
    antithetic : bool
        Pair each noise draw with its negation when the map is noisy.
    """
    if samples < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples, got {samples}")
    p = hermitize(np.asarray(input_cov, dtype=complex))
    d = phi.input_dim
    if p.shape != (d, d):
        raise ValueError(f"input covariance is {p.shape}, expected {(d, d)}")
    pinv, rank = psd_pinv(p)

    if phi.linear is not None:
        g, ng = phi.linear
        a = g if rank == d else g @ range_projector(p)
        return LinearModel(a, hermitize(ng @ ng.conj().T), p, 0)

    if isinstance(rng, int):
        rng = RngStream(rng)
    factor = _psd_factor(p)
    sizes = [CHUNK] * (samples // CHUNK) + ([samples % CHUNK] if samples % CHUNK else [])

    def job(i):
        return _chunk_moments(phi, factor, sizes[i], rng.child(i), antithetic)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(job, range(len(sizes))))
    else:
        parts = [job(i) for i in range(len(sizes))]

    s_yu = sum(pt[0] for pt in parts) / samples
    s_yy = sum(pt[1] for pt in parts) / samples
    s_uu = sum(pt[2] for pt in parts) / samples
    a, t = model_from_moments(s_yu, s_yy, s_uu, pinv)
    return LinearModel(a, t, p, samples)


def model_from_moments(s_yu, s_yy, s_uu, pinv):
    """Gain ``s_yu @ pinv`` and the covariance of ``y - A u`` from second moments."""
    a = s_yu @ pinv
    ah = a.conj().T
    t = s_yy - a @ s_yu.conj().T - s_yu @ ah + a @ s_uu @ ah
    return a, psd_floor(t)


def calibrate_dac(bits, p) -> list[QuantizerSpec]:
    """Per-stream DAC bank matched to the marginal variances diag(P)."""
    return calibrated_bank(bits, np.real(np.diagonal(np.asarray(p))))


def calibrate_adc(
    bits,
    w_tx,
    dac,
    h,
    noise_std: float,
    input_cov,
    rng: RngStream | int = 0,
    samples: int = 100_000,
) -> list[QuantizerSpec]:
    """Per-branch ADC bank matched to the marginal variances of ``H x + sigma xi``.

    The transmit covariance E[x x^H] is measured by pushing Gaussian rows
    through the quantized transmitter.
    """
    h = np.atleast_2d(np.asarray(h, dtype=complex))
    if math.isinf(parse_bits(bits)):
        return calibrated_bank(bits, np.ones(h.shape[0]))
    if isinstance(rng, int):
        rng = RngStream(rng)
    tx = make_tx_chain(w_tx, dac)
    factor = _psd_factor(input_cov)
    gen = rng.generator()
    u = standard_complex_normal(gen, (samples, factor.shape[0])) @ factor
    x = tx.evaluate(u)
    s_x = x.T @ x.conj() / samples
    var = np.real(np.einsum("ij,jk,ik->i", h, s_x, h.conj())) + noise_std**2
    return calibrated_bank(bits, var)
