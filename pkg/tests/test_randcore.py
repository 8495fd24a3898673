import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qmimo.randcore import (
    DftUnitary,
    HouseholderUnitary,
    RngStream,
    sample_complex_gaussian,
    sample_haar_unitary,
    sample_rayleigh_channel,
)


def test_stream_reproducible():
    a = RngStream(5, 3).generator().standard_normal(8)
    b = RngStream(5, 3).generator().standard_normal(8)
    c = RngStream(5, 4).generator().standard_normal(8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_child_streams_distinct():
    s = RngStream(1, 0)
    draws = [s.child(i).generator().standard_normal(4) for i in range(3)]
    assert not np.array_equal(draws[0], draws[1])
    assert not np.array_equal(draws[1], draws[2])


def test_stream_rejects_negative():
    with pytest.raises(ValueError):
        RngStream(-1)


def test_identity_covariance_rows():
    z = sample_complex_gaussian(100_000, 2, np.eye(2), RngStream(11))
    cov = z.T @ z.conj() / z.shape[0]
    assert np.abs(cov - np.eye(2)).max() < 0.02
    # half the variance in each of the real and imaginary parts
    assert abs(np.mean(z.real ** 2) - 0.5) < 0.01


def test_zero_covariance_gives_zeros():
    z = sample_complex_gaussian(7, 2, np.zeros((2, 2)), RngStream(0))
    assert np.array_equal(z, np.zeros((7, 2)))


def test_scalar_variance_four():
    z = sample_complex_gaussian(100_000, 1, [[4.0]], RngStream(2))
    assert abs(np.mean(np.abs(z) ** 2) / 4 - 1) < 0.02


def test_rank_one_rows_are_scalar_multiples():
    e = np.exp(1j * np.pi * np.cos(np.pi / 4) * np.arange(4))
    z = sample_complex_gaussian(50, 4, np.outer(e, e.conj()) / 4, RngStream(3))
    coef = z[:, :1] / e[0]
    assert np.allclose(z, coef * e[None, :], atol=1e-12)


def test_non_psd_rejected():
    with pytest.raises(ValueError, match="not PSD"):
        sample_complex_gaussian(4, 2, np.diag([1.0, -1e-3]), RngStream(0))


def test_non_hermitian_rejected():
    with pytest.raises(ValueError, match="Hermitian"):
        sample_complex_gaussian(4, 2, np.array([[1, 1], [0, 1.0]]), RngStream(0))


def test_haar_scalar_unit_modulus():
    phases = []
    for i in range(2000):
        v = sample_haar_unitary(1, RngStream(9, i))
        assert abs(abs(v[0, 0]) - 1) < 1e-12
        phases.append(np.angle(v[0, 0]))
    # uniform phase: circular mean near zero, quartiles near +-pi/2
    assert abs(np.mean(np.exp(1j * np.array(phases)))) < 0.07
    q1, q3 = np.quantile(phases, [0.25, 0.75])
    assert abs(q1 + np.pi / 2) < 0.2 and abs(q3 - np.pi / 2) < 0.2


def test_haar_unitary_64():
    v = sample_haar_unitary(64, RngStream(1))
    assert np.linalg.norm(v.conj().T @ v - np.eye(64)) < 1e-10


def test_haar_second_moment():
    gen = RngStream(12).generator()
    vals = np.array([abs(sample_haar_unitary(32, gen)[0, 0]) ** 2 for _ in range(10_000)])
    assert abs(vals.mean() * 32 - 1) < 0.1


def test_haar_left_invariance():
    # W V matches the Haar first and second moments within 3 standard errors
    n, draws = 4, 10_000
    w = sample_haar_unitary(n, RngStream(77))
    gen = RngStream(78).generator()
    vs = np.stack([sample_haar_unitary(n, gen) for _ in range(draws)])
    for sample in (vs, w @ vs):
        stats = {
            "mean_v11": (sample[:, 0, 0], 0.0),
            "abs2_v11": (np.abs(sample[:, 0, 0]) ** 2, 1 / n),
            "abs2_v24": (np.abs(sample[:, 1, 3]) ** 2, 1 / n),
            "pseudo_v11": (sample[:, 0, 0] ** 2, 0.0),
            "cross_v11_v22": (sample[:, 0, 0] * sample[:, 1, 1].conj(), 0.0),
        }
        for name, (vals, target) in stats.items():
            se = np.sqrt(np.var(vals.real) + np.var(vals.imag) if np.iscomplexobj(vals) else np.var(vals))
            assert abs(vals.mean() - target) < 3 * se / np.sqrt(draws), name


def test_householder_matches_dense_moments():
    n, draws = 6, 4000
    gen = RngStream(21).generator()
    vals = []
    for _ in range(draws):
        v = HouseholderUnitary.sample(n, gen).to_dense()
        vals.append([abs(v[0, 0]) ** 2, abs(v[0, 0]) ** 4, abs(np.trace(v)) ** 2])
    m = np.mean(vals, axis=0)
    assert abs(m[0] * n - 1) < 0.05
    assert abs(m[1] / (2 / (n * (n + 1))) - 1) < 0.1
    assert abs(m[2] - 1) < 0.1


@settings(max_examples=20, deadline=None)
@given(n=st.integers(1, 40), seed=st.integers(0, 2**32))
def test_householder_unitary_and_adjoint(n, seed):
    v = HouseholderUnitary.sample(n, RngStream(seed))
    d = v.to_dense()
    assert np.linalg.norm(d.conj().T @ d - np.eye(n)) < 1e-10
    x = np.arange(2 * n, dtype=complex).reshape(n, 2)
    assert np.allclose(v.apply_adjoint(v.apply(x)), x)
    assert np.allclose(v.apply_adjoint(x), d.conj().T @ x)


def test_dft_unitary():
    d = DftUnitary(8).to_dense()
    assert np.allclose(d.conj().T @ d, np.eye(8))


def test_rayleigh_shape_and_power():
    assert sample_rayleigh_channel(8, 16, RngStream(0)).shape == (8, 16)
    gen = RngStream(4).generator()
    h = np.array([sample_rayleigh_channel(1, 1, gen)[0, 0] for _ in range(100_000)])
    assert abs(np.mean(np.abs(h) ** 2) - 1) < 0.02


def test_rayleigh_deterministic():
    assert np.array_equal(sample_rayleigh_channel(3, 2, RngStream(8, 1)), sample_rayleigh_channel(3, 2, RngStream(8, 1)))


def test_haar_rejects_zero():
    with pytest.raises(ValueError):
        sample_haar_unitary(0, RngStream(0))
