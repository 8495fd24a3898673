import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qmimo.linearize import LinearModel
from qmimo.spectro import (
    SpectralCovarianceSet,
    SubbandPlan,
    aclr,
    aclr_db,
    array_response,
    beam_power,
    construct_subband_covariances,
    nu_floor,
    power_fractions,
    spectral_covariances,
    subband_covariance,
    ula_gram,
)


def model(a, t):
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    return LinearModel(a, np.atleast_2d(np.asarray(t, dtype=complex)), np.eye(a.shape[1]), 0)


def random_psd(gen, n, rank=None):
    g = gen.standard_normal((n, rank or n)) + 1j * gen.standard_normal((n, rank or n))
    return g @ g.conj().T


def random_model(gen, n):
    return model(gen.standard_normal((n, n)) + 1j * gen.standard_normal((n, n)), random_psd(gen, n))


def test_plan_fractions():
    plan = SubbandPlan.contiguous([512, 512])
    assert plan.n_fft == 1024
    assert np.array_equal(plan.fractions, [0.5, 0.5])
    assert SubbandPlan(np.array([0, 2, 2, 1])).fractions.sum() == 1


def test_subband_covariance_examples():
    assert np.allclose(subband_covariance(model(np.eye(2), np.zeros((2, 2))), np.eye(2), 1.0), np.eye(2))
    assert np.allclose(subband_covariance(model(2 * np.eye(2), np.eye(2)), np.eye(2), 0.5), 2.5 * np.eye(2))


def test_total_identity():
    gen = np.random.default_rng(0)
    m = random_model(gen, 3)
    covs = [random_psd(gen, 3), random_psd(gen, 3, 1), np.zeros((3, 3))]
    deltas = np.array([0.25, 0.5, 0.25])
    s = spectral_covariances(m, covs, deltas)
    p = sum(d * c for d, c in zip(deltas, covs))
    assert np.allclose(s.total, m.gain @ p @ m.gain.conj().T + m.noise_cov, atol=1e-10)


def test_power_fractions_examples():
    s = np.eye(2)
    assert np.allclose(power_fractions(SpectralCovarianceSet([s, s])), [0.5, 0.5])
    assert np.allclose(power_fractions([9 * s, s]), [0.9, 0.1])
    with pytest.raises(ValueError):
        power_fractions([np.zeros((2, 2))] * 2)


def test_aclr_examples():
    assert aclr([0.5, 0.5]) == 1
    assert aclr([0.9, 0.1]) == pytest.approx(9)
    assert aclr_db([0.9, 0.1]) == pytest.approx(9.5424, abs=1e-4)
    assert aclr([1.0, 0.0]) == math.inf


def test_array_response_examples():
    assert np.allclose(array_response(5, math.pi / 2), np.ones(5))
    assert np.allclose(array_response(1, 0.3), [1])
    assert np.allclose(array_response(4, 0.0), [1, -1, 1, -1])


@given(n=st.integers(1, 32), psi=st.floats(1e-6, 2 * math.pi))
def test_array_response_unit_modulus(n, psi):
    e = array_response(n, psi)
    assert e[0] == 1
    assert np.allclose(np.abs(e), 1)


def test_beam_power_examples():
    phi = math.pi / 4
    e = array_response(16, phi)
    assert beam_power(np.outer(e, e.conj()) / 16, phi) == pytest.approx(16)
    assert beam_power(np.eye(16), 1.234) == pytest.approx(16)


def test_beam_power_gram_conservation():
    gen = np.random.default_rng(1)
    s = random_psd(gen, 6)
    w = ula_gram(6)
    psi = np.linspace(0, 2 * math.pi, 10_000, endpoint=False) + 2 * math.pi / 10_000
    integral = beam_power(s, psi).mean() * 2 * math.pi
    assert integral == pytest.approx(2 * math.pi * np.trace(s @ w).real, rel=1e-6)


def test_nu_floor_examples():
    assert np.allclose(nu_floor(model(np.eye(2), np.zeros((2, 2))), np.eye(2), [0.5, 0.5]), 0)
    assert np.allclose(nu_floor(model(np.zeros((2, 2)), np.eye(2)), np.eye(2), [0.3, 0.7]), [0.3, 0.7])


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32), n=st.integers(1, 5), m=st.integers(1, 5))
def test_fractions_above_floor(seed, n, m):
    gen = np.random.default_rng(seed)
    mdl = random_model(gen, n)
    deltas = gen.dirichlet(np.ones(m))
    covs = [random_psd(gen, n, int(gen.integers(1, n + 1))) * gen.uniform(0, 3) for _ in range(m)]
    p = sum(d * c for d, c in zip(deltas, covs))
    nu = power_fractions(spectral_covariances(mdl, covs, deltas))
    assert np.all(nu >= nu_floor(mdl, p, deltas) - 1e-12)
    assert nu.sum() == pytest.approx(1)


def test_construct_t_zero_nu_delta():
    p = np.diag([1.0, 2.0]).astype(complex)
    res = construct_subband_covariances(model(np.eye(2), np.zeros((2, 2))), p, [0.25, 0.75], [0.25, 0.75])
    assert res.feasible
    assert all(np.allclose(c, p) for c in res.covs)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32), m=st.integers(2, 5))
def test_construct_roundtrip(seed, m):
    gen = np.random.default_rng(seed)
    mdl = random_model(gen, 3)
    p = random_psd(gen, 3)
    deltas = gen.dirichlet(np.ones(m))
    floor = nu_floor(mdl, p, deltas)
    nu = floor + (1 - floor.sum()) * gen.dirichlet(np.ones(m))
    res = construct_subband_covariances(mdl, p, deltas, nu)
    assert res.feasible
    assert np.allclose(sum(d * c for d, c in zip(deltas, res.covs)), p, atol=1e-10)
    assert np.allclose(power_fractions(spectral_covariances(mdl, res.covs, deltas)), nu, atol=1e-9)


def test_construct_reports_violating_band():
    mdl = model(0.6 * np.eye(2), 0.2 * np.eye(2))
    p = np.eye(2)
    floor = nu_floor(mdl, p, [0.5, 0.5])
    nu = np.array([1 - floor[1] / 2, floor[1] / 2])
    res = construct_subband_covariances(mdl, p, [0.5, 0.5], nu)
    assert not res.feasible
    assert set(res.violations) == {1}
    assert res.violations[1] == pytest.approx(floor[1] / 2)
