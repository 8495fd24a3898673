import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from qmimo.quantizer import (
    INF_BITS,
    QuantizerSpec,
    calibrated_bank,
    optimize_step,
    parse_bits,
    quantize,
    quantizer_mse,
)

# unit-variance MSE-optimal steps, from a grid + Brent search with quadrature MSE
OPTIMAL_STEPS = {1: 1.595769, 2: 0.995687, 3: 0.586019, 4: 0.335201, 5: 0.188139, 6: 0.104063, 7: 0.056868}


def quad_mse(bits, step, var=1.0):
    """Independent oracle: adaptive quadrature over each cell."""
    sd = math.sqrt(var)
    half = 2 ** (bits - 1)
    edges = [k * step for k in range(1, half)]
    pts = [0.0] + edges + [max(8 * sd, half * step + 8 * sd)]
    total = 0.0
    for i, (a, b) in enumerate(zip(pts[:-1], pts[1:])):
        level = (min(i, half - 1) + 0.5) * step
        f = lambda x: (x - level) ** 2 * stats.norm.pdf(x, scale=sd)
        total += integrate.quad(f, a, b, epsabs=0, epsrel=1e-12, limit=200)[0]
    return 2 * total


def test_one_bit_sign():
    a = 0.7
    assert quantize(QuantizerSpec(1, 2 * a), 0.3 - 5j) == pytest.approx(a - a * 1j)


def test_infinite_identity():
    z = np.array([1.234 - 9.1j, 1e6 + 0j])
    assert np.array_equal(quantize(QuantizerSpec(INF_BITS), z), z)


def test_saturation():
    assert quantize(QuantizerSpec(2, 1.0), 10.0) == pytest.approx(1.5)


@settings(max_examples=200)
@given(
    bits=st.integers(1, 8),
    step=st.floats(1e-3, 10),
    re=st.floats(-1e3, 1e3),
    im=st.floats(-1e3, 1e3),
)
def test_odd_and_on_grid(bits, step, re, im):
    spec = QuantizerSpec(bits, step)
    z = complex(re, im)
    q = quantize(spec, z)
    assert quantize(spec, -z) == -q
    for part in (q.real, q.imag):
        k = abs(part) / step + 0.5
        assert abs(k - round(k)) < 1e-9
        assert 1 <= round(k) <= 2 ** (bits - 1)


def test_parse_bits():
    assert parse_bits("inf") == math.inf
    assert parse_bits(3) == 3
    with pytest.raises(ValueError):
        parse_bits(0)


def test_mse_one_bit_closed_form():
    spec = QuantizerSpec(1, 2 * math.sqrt(2 / math.pi))
    assert quantizer_mse(spec, 1.0) == pytest.approx(1 - 2 / math.pi, rel=1e-10)


@pytest.mark.parametrize("bits,step", [(1, 1.3), (2, 0.9957), (3, 0.5), (4, 0.2), (6, 0.05), (3, 1e-4)])
def test_mse_matches_quadrature(bits, step):
    assert quantizer_mse(QuantizerSpec(bits, step), 1.0) == pytest.approx(quad_mse(bits, step), rel=1e-8)


def test_mse_tiny_step_approaches_variance():
    m = quantizer_mse(QuantizerSpec(3, 1e-4), 2.0)
    assert m < 2.0
    assert m == pytest.approx(2.0, rel=1e-3)


def test_mse_infinite_zero():
    assert quantizer_mse(QuantizerSpec(INF_BITS), 3.0) == 0.0


def test_mse_rejects_bad_variance():
    with pytest.raises(ValueError):
        quantizer_mse(QuantizerSpec(2, 1.0), 0.0)


@pytest.mark.parametrize("bits", sorted(OPTIMAL_STEPS))
def test_optimal_step_frozen(bits):
    assert optimize_step(bits, 1.0) == pytest.approx(OPTIMAL_STEPS[bits], abs=2e-6)


def test_optimal_step_one_bit_levels():
    assert optimize_step(1, 1.0) / 2 == pytest.approx(math.sqrt(2 / math.pi), rel=1e-6)


@pytest.mark.parametrize("bits", [1, 2, 3, 5])
def test_optimal_beats_grid(bits):
    opt = quantizer_mse(QuantizerSpec(bits, optimize_step(bits, 1.0)), 1.0)
    grid = np.linspace(1e-3, 10, 10_000)
    best = min(quantizer_mse(QuantizerSpec(bits, s), 1.0) for s in grid)
    assert opt <= best + 1e-6


@given(bits=st.integers(1, 6), var=st.floats(1e-4, 1e4))
@settings(max_examples=30, deadline=None)
def test_step_scale_covariance(bits, var):
    assert optimize_step(bits, var) == pytest.approx(math.sqrt(var) * optimize_step(bits, 1.0), rel=1e-12)


def test_variance_four_is_double():
    assert optimize_step(1, 4.0) == 2 * optimize_step(1, 1.0)


def test_mse_monotone_in_bits():
    mses = [quantizer_mse(QuantizerSpec(b, optimize_step(b, 1.0)), 1.0) for b in range(1, 9)]
    assert all(x > y for x, y in zip(mses, mses[1:]))


def test_calibrated_bank_half_variance():
    bank = calibrated_bank(2, [2.0, 8.0])
    assert bank[0].step == pytest.approx(optimize_step(2, 1.0))
    assert bank[1].step == pytest.approx(2 * optimize_step(2, 1.0))
