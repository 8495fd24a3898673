"""Midrise uniform scalar quantizers applied independently to I and Q.

Steps are sized to minimise mean-square distortion for a Gaussian input. The
distortion integral is evaluated cell by cell in closed form (truncated
Gaussian second moments), which is exact up to floating-point error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import optimize, special

__all__ = [
    "INF_BITS",
    "QuantizerSpec",
    "quantize",
    "quantize_columns",
    "quantizer_mse",
    "optimize_step",
    "calibrated_bank",
    "parse_bits",
]

INF_BITS = math.inf


def parse_bits(bits) -> float | int:
    """Normalise a bit-depth value; accepts ints, ``inf`` and the string ``"inf"``."""
    if isinstance(bits, str):
        if bits.strip().lower() in ("inf", "infinite", "infinity"):
            return INF_BITS
        raise ValueError(f"bits must be an integer >= 1 or 'inf', got {bits!r}")
    if isinstance(bits, float) and math.isinf(bits) and bits > 0:
        return INF_BITS
    if isinstance(bits, bool) or not float(bits).is_integer() or int(bits) < 1:
        raise ValueError(f"bits must be an integer >= 1 or 'inf', got {bits!r}")
    return int(bits)


@dataclass(frozen=True)
class QuantizerSpec:
    """Symmetric midrise quantizer with ``2**bits`` levels per real dimension.

    Reconstruction points are ``±(k - 1/2)·step`` for ``k = 1..2**(bits-1)``;
    inputs beyond ``±clip`` saturate to the outermost level. ``bits=inf``
    is the identity map and ignores ``step``.
    """

    bits: float | int
    step: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "bits", parse_bits(self.bits))
        if not self.infinite and not (self.step > 0 and math.isfinite(self.step)):
            raise ValueError(f"step must be positive and finite, got {self.step}")

    @property
    def infinite(self) -> bool:
        return math.isinf(self.bits)

    @property
    def levels(self) -> float | int:
        return INF_BITS if self.infinite else 2**self.bits

    @property
    def clip(self) -> float:
        return INF_BITS if self.infinite else self.step * 2 ** (self.bits - 1)

    @property
    def reconstruction_points(self) -> np.ndarray:
        if self.infinite:
            raise ValueError("identity quantizer has no finite level set")
        half = 2 ** (self.bits - 1)
        k = np.arange(1, half + 1)
        pos = (k - 0.5) * self.step
        return np.concatenate([-pos[::-1], pos])


def _quantize_real(x: np.ndarray, step, half_levels) -> np.ndarray:
    # copysign keeps the map exactly odd, including at 0 and at cell edges
    mag = (np.floor(np.abs(x) / step) + 0.5) * step
    mag = np.minimum(mag, (half_levels - 0.5) * step)
    return np.copysign(mag, x)


def quantize(spec: QuantizerSpec, value):
    """Quantize real and imaginary parts of ``value`` independently."""
    if spec.infinite:
        return value
    z = np.asarray(value)
    half = 2 ** (spec.bits - 1)
    if np.iscomplexobj(z):
        out = _quantize_real(z.real, spec.step, half) + 1j * _quantize_real(z.imag, spec.step, half)
    else:
        out = _quantize_real(z, spec.step, half)
    return out[()] if out.ndim == 0 and np.isscalar(value) else out


def quantize_columns(specs: QuantizerSpec | Sequence[QuantizerSpec], u: np.ndarray) -> np.ndarray:
    """Apply a (possibly per-column) quantizer bank to the rows of ``u``."""
    if isinstance(specs, QuantizerSpec):
        return quantize(specs, u)
    specs = list(specs)
    if len(specs) != u.shape[-1]:
        raise ValueError(f"{len(specs)} quantizers for {u.shape[-1]} columns")
    if all(s.infinite for s in specs):
        return u
    finite = np.array([not s.infinite for s in specs])
    steps = np.array([1.0 if s.infinite else s.step for s in specs])
    half = np.array([1.0 if s.infinite else 2.0 ** (s.bits - 1) for s in specs])
    q = _quantize_real(u.real, steps, half) + 1j * _quantize_real(u.imag, steps, half)
    return np.where(finite, q, u)


def _cell_sq_error(a, b, c):
    """∫_a^b (t - c)^2 φ(t) dt for the standard normal density, vectorised."""
    # upper-tail differences avoid cancellation in Φ(b) - Φ(a) for large a
    mass = np.where(a > 0, special.ndtr(-a) - special.ndtr(-b), special.ndtr(b) - special.ndtr(a))

    def edge(t):
        # (t - 2c) φ(t), which vanishes at ±inf
        fin = np.isfinite(t)
        ts = np.where(fin, t, 0.0)
        return np.where(fin, (ts - 2 * c) * np.exp(-0.5 * ts * ts) / math.sqrt(2 * math.pi), 0.0)

    return mass * (1.0 + c * c) + edge(a) - edge(b)


def _mse_unit(bits: int, step: float) -> float:
    half = 2 ** (bits - 1)
    # positive half only; the error is symmetric
    k = np.arange(half)
    lo = k * step
    hi = np.where(k == half - 1, np.inf, (k + 1) * step)
    c = (k + 0.5) * step
    return float(2.0 * np.sum(_cell_sq_error(lo, hi, c)))


def quantizer_mse(spec: QuantizerSpec, input_variance: float) -> float:
    """E[(Q(x) - x)^2] for real x ~ N(0, input_variance)."""
    if not input_variance > 0:
        raise ValueError(f"input variance must be positive, got {input_variance}")
    if spec.infinite:
        return 0.0
    sigma = math.sqrt(input_variance)
    return input_variance * _mse_unit(spec.bits, spec.step / sigma)


@lru_cache(maxsize=None)
def _optimal_unit_step(bits: int) -> float:
    # coarse log grid brackets the minimum, Brent polishes it
    grid = np.geomspace(1e-3, 10.0, 2000)
    vals = np.array([_mse_unit(bits, s) for s in grid])
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    res = optimize.minimize_scalar(
        lambda s: _mse_unit(bits, s), bounds=(lo, hi), method="bounded", options={"xatol": 1e-12}
    )
    return float(res.x)


def optimize_step(bits: int, input_variance: float) -> float:
    """MSE-optimal step for a real Gaussian input of the given variance."""
    bits = parse_bits(bits)
    if math.isinf(bits):
        raise ValueError("the identity quantizer has no step to optimise")
    if not input_variance > 0:
        raise ValueError(f"input variance must be positive, got {input_variance}")
    return math.sqrt(input_variance) * _optimal_unit_step(bits)


def calibrated_bank(bits, complex_variances) -> list[QuantizerSpec]:
    """One MSE-optimal quantizer per branch.

    ``complex_variances`` are E|x|^2 per branch; each real dimension sees half.
    """
    bits = parse_bits(bits)
    out = []
    for i, v in enumerate(np.atleast_1d(np.asarray(complex_variances, dtype=float))):
        if math.isinf(bits):
            out.append(QuantizerSpec(INF_BITS))
            continue
        if not v > 0:
            raise ValueError(f"branch {i} has zero input variance; set an explicit step")
        out.append(QuantizerSpec(bits, optimize_step(bits, v / 2.0)))
    return out
