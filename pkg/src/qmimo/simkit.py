"""End-to-end Monte Carlo of the quantized transceiver.

One trial: draw frequency-domain streams Z, modulate ``U = V^H Z``, quantize
and precode to X, measure the transmit spectrum ``R = V X``, then optionally
pass X through the channel, ADCs and combiner and demodulate to Z_hat.
Trials are independent; trial t draws everything from ``RngStream(seed, t)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ._linalg import psd_pinv
from .channelmodels import ChannelSpec, apply_channel
from .linearize import DEFAULT_SAMPLES, LinearModel, calibrate_adc, calibrate_dac, model_from_moments
from .quantizer import QuantizerSpec, parse_bits, quantize_columns
from .randcore import (
    DftUnitary,
    RngStream,
    as_generator,
    as_unitary,
    sample_complex_gaussian,
    sample_haar_operator,
    sample_rayleigh_channel,
    standard_complex_normal,
)
from .spectro import SubbandPlan, aclr, aclr_db, beam_power, power_fractions

__all__ = [
    "SystemConfig",
    "TrialResult",
    "SimulationResult",
    "RegressionMoments",
    "generate_streams",
    "run_transmitter",
    "run_receiver",
    "empirical_subband_covariance",
    "fit_linear_model",
    "simulate_trial",
    "run_trials",
    "sweep_dac",
]

# below this fraction of total power a band is treated as empty (V V^H roundoff)
ROUNDOFF_FLOOR = 1e-20

# child-stream layout inside a trial
_V, _Z, _H, _XI, _CAL = range(5)


@dataclass(frozen=True, eq=False)
class SystemConfig:
    """Full transceiver description for a Monte Carlo run.

    ``dac_bits``/``adc_bits`` without an explicit step give MSE-optimal banks:
    the DACs are matched to diag(sum_m delta_m P_m), the ADCs to the marginal
    variances of ``H x + sigma xi`` for the channel in use. Leave ``adc_bits``
    as None to simulate the transmitter only.
    """

    plan: SubbandPlan
    covs: Sequence[np.ndarray]
    w_tx: np.ndarray
    dac_bits: float | int = math.inf
    dac_step: float | None = None
    channel: np.ndarray | None = None
    resample_channel: bool = False
    noise_std: float = 0.0
    w_rx: np.ndarray | None = None
    adc_bits: float | int | None = None
    adc_step: float | None = None
    transform: str = "haar"
    pin_v: bool = False
    trials: int = 100
    calibration_samples: int = DEFAULT_SAMPLES
    seed: int = 0
    n_angles: int = 181
    signal_band: int = 0
    adjacent_band: int = 1

    def __post_init__(self):
        w_tx = np.atleast_2d(np.asarray(self.w_tx, dtype=complex))
        object.__setattr__(self, "w_tx", w_tx)
        covs = [np.asarray(p, dtype=complex) for p in self.covs]
        object.__setattr__(self, "covs", covs)
        object.__setattr__(self, "dac_bits", parse_bits(self.dac_bits))
        if len(covs) != self.plan.n_bands:
            raise ValueError(f"{len(covs)} covariances for {self.plan.n_bands} sub-bands")
        for m, p in enumerate(covs):
            if p.shape != (self.n_streams_tx, self.n_streams_tx):
                raise ValueError(f"P_{m} is {p.shape}, expected {(self.n_streams_tx,) * 2}")
        if self.transform not in ("haar", "fft"):
            raise ValueError(f"transform must be 'haar' or 'fft', got {self.transform!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.adc_bits is not None:
            object.__setattr__(self, "adc_bits", parse_bits(self.adc_bits))
            if self.channel is None and not self.resample_channel:
                raise ValueError("receiver simulation needs a channel or resample_channel=True")
            n_r = self.n_ant_rx
            w_rx = np.eye(n_r, dtype=complex) if self.w_rx is None else np.atleast_2d(np.asarray(self.w_rx, dtype=complex))
            if w_rx.shape[1] != n_r:
                raise ValueError(f"W_rx has {w_rx.shape[1]} columns, expected N_r = {n_r}")
            object.__setattr__(self, "w_rx", w_rx)
        if self.channel is not None:
            h = np.atleast_2d(np.asarray(self.channel, dtype=complex))
            if h.shape[1] != self.n_ant_tx:
                raise ValueError(f"H has {h.shape[1]} columns, expected N_t = {self.n_ant_tx}")
            object.__setattr__(self, "channel", h)

    @property
    def n_fft(self) -> int:
        return self.plan.n_fft

    @property
    def n_streams_tx(self) -> int:
        return self.w_tx.shape[1]

    @property
    def n_ant_tx(self) -> int:
        return self.w_tx.shape[0]

    @property
    def n_ant_rx(self) -> int | None:
        if self.channel is not None:
            return self.channel.shape[0]
        if self.w_rx is not None:
            return np.atleast_2d(self.w_rx).shape[1]
        return None

    @property
    def n_streams_rx(self) -> int | None:
        return None if self.w_rx is None else self.w_rx.shape[0]

    @property
    def receive(self) -> bool:
        return self.adc_bits is not None

    @property
    def deltas(self) -> np.ndarray:
        return self.plan.fractions

    @property
    def average_cov(self) -> np.ndarray:
        return sum(d * p for d, p in zip(self.deltas, self.covs))

    def dac_bank(self) -> list[QuantizerSpec]:
        if self.dac_step is not None and not math.isinf(self.dac_bits):
            return [QuantizerSpec(self.dac_bits, self.dac_step)] * self.n_streams_tx
        return calibrate_dac(self.dac_bits, self.average_cov)

    def adc_bank(self, h: np.ndarray, dac, rng) -> list[QuantizerSpec]:
        if self.adc_step is not None and not math.isinf(self.adc_bits):
            return [QuantizerSpec(self.adc_bits, self.adc_step)] * h.shape[0]
        return calibrate_adc(
            self.adc_bits, self.w_tx, dac, h, self.noise_std, self.average_cov, rng,
            samples=min(self.calibration_samples, 100_000),
        )

    def with_bits(self, dac_bits=None, adc_bits=None) -> "SystemConfig":
        kw = {}
        if dac_bits is not None:
            kw["dac_bits"] = dac_bits
        if adc_bits is not None:
            kw["adc_bits"] = adc_bits
        return replace(self, **kw)


class RegressionMoments:
    """Running second moments of (input, output) row pairs for least squares."""

    def __init__(self, d_in: int, d_out: int):
        self.s_rz = np.zeros((d_out, d_in), dtype=complex)
        self.s_rr = np.zeros((d_out, d_out), dtype=complex)
        self.s_zz = np.zeros((d_in, d_in), dtype=complex)
        self.count = 0

    def add(self, z: np.ndarray, r: np.ndarray) -> "RegressionMoments":
        zc = z.conj()
        self.s_rz += r.T @ zc
        self.s_rr += r.T @ r.conj()
        self.s_zz += z.T @ zc
        self.count += z.shape[0]
        return self

    def merge(self, other: "RegressionMoments") -> "RegressionMoments":
        out = RegressionMoments(self.s_zz.shape[0], self.s_rr.shape[0])
        for name in ("s_rz", "s_rr", "s_zz"):
            setattr(out, name, getattr(self, name) + getattr(other, name))
        out.count = self.count + other.count
        return out

    def fit(self) -> LinearModel:
        d = self.s_zz.shape[0]
        if self.count <= d:
            raise ValueError(f"need more than {d} rows to fit a {d}-input model, got {self.count}")
        n = self.count
        s_zz = self.s_zz / n
        pinv, _ = psd_pinv(s_zz)
        a, t = model_from_moments(self.s_rz / n, self.s_rr / n, s_zz, pinv)
        return LinearModel(a, t, s_zz, n)


def fit_linear_model(inputs: np.ndarray, outputs: np.ndarray) -> LinearModel:
    """Least-squares ``outputs ≈ A inputs`` row by row, plus residual covariance."""
    inputs = np.asarray(inputs, dtype=complex)
    outputs = np.asarray(outputs, dtype=complex)
    if inputs.shape[0] != outputs.shape[0]:
        raise ValueError("inputs and outputs must have the same number of rows")
    return RegressionMoments(inputs.shape[1], outputs.shape[1]).add(inputs, outputs).fit()


def generate_streams(plan: SubbandPlan, covs, n_streams: int, rng) -> np.ndarray:
    """Rows drawn independently from CN(0, P_m) for the band m each bin belongs to."""
    if len(covs) != plan.n_bands:
        raise ValueError(f"{len(covs)} covariances for {plan.n_bands} sub-bands")
    gen = as_generator(rng)
    z = np.zeros((plan.n_fft, n_streams), dtype=complex)
    for m, p in enumerate(covs):
        rows = np.flatnonzero(plan.selection == m)
        if rows.size:
            z[rows] = sample_complex_gaussian(rows.size, n_streams, p, gen)
    return z


def run_transmitter(z: np.ndarray, v, dac, w_tx) -> tuple[np.ndarray, np.ndarray]:
    """Return the antenna signal X (N x N_t) and its spectrum R = V X."""
    v = as_unitary(v)
    w_tx = np.atleast_2d(np.asarray(w_tx, dtype=complex))
    if z.shape[1] != w_tx.shape[1]:
        raise ValueError(f"Z has {z.shape[1]} streams, W_tx expects {w_tx.shape[1]}")
    u = v.apply_adjoint(z)
    x = quantize_columns(dac, u) @ w_tx.T
    return x, v.apply(x)


def run_receiver(x, h, noise_std: float, w_rx, adc, v, noise=None, rng=None) -> np.ndarray:
    """Z_hat = V [Q_rx(H x_n + sigma xi_n) W_rx^T]; ``noise`` or ``rng`` supplies xi."""
    channel = ChannelSpec(h, noise_std)
    if noise is None and noise_std > 0:
        if rng is None:
            raise ValueError("noisy receiver needs `noise` or `rng`")
        noise = standard_complex_normal(as_generator(rng), (x.shape[0], channel.n_r))
    y = apply_channel(channel, x, noise)
    w_rx = np.atleast_2d(np.asarray(w_rx, dtype=complex))
    return as_unitary(v).apply(quantize_columns(adc, y) @ w_rx.T)


def empirical_subband_covariance(r: np.ndarray, plan: SubbandPlan) -> list[np.ndarray]:
    """S_m(N) = (1/N) sum over bins of band m of r_n r_n^H."""
    n = r.shape[0]
    if n != plan.n_fft:
        raise ValueError(f"R has {n} rows, plan covers {plan.n_fft} bins")
    out = []
    for m in range(plan.n_bands):
        rm = r[plan.selection == m]
        out.append(rm.T @ rm.conj() / n)
    return out


@dataclass(eq=False)
class TrialResult:
    empirical_s: list
    empirical_nu: np.ndarray
    empirical_aclr: float
    empirical_beam: np.ndarray
    regression: RegressionMoments | None = None

    @property
    def fitted_model(self) -> LinearModel | None:
        return None if self.regression is None else self.regression.fit()


@dataclass(eq=False)
class SimulationResult:
    """Trial-mean statistics; scalars derive from the mean S_m matrices."""

    trials: list
    mean_s: list
    nu: np.ndarray
    nu_stderr: np.ndarray
    aclr: float
    aclr_db: float
    aclr_db_stderr: float
    angles: np.ndarray
    beam: np.ndarray
    beam_stderr: np.ndarray
    regression: RegressionMoments | None = None
    dac: list = field(default_factory=list)

    @property
    def fitted_model(self) -> LinearModel | None:
        return None if self.regression is None else self.regression.fit()


def _nu_from(s_list) -> np.ndarray:
    nu = power_fractions(s_list)
    nu[nu < ROUNDOFF_FLOOR] = 0.0
    return nu


def _transform(config: SystemConfig, stream: RngStream):
    if config.transform == "fft":
        return DftUnitary(config.n_fft)
    src = RngStream(config.seed, 0) if config.pin_v else stream
    return sample_haar_operator(config.n_fft, src.child(_V))


def simulate_trial(config: SystemConfig, trial: int, dac_banks=None) -> list[TrialResult]:
    """One trial, replayed for every DAC bank on the same V, Z, H and noise."""
    dac_banks = [config.dac_bank()] if dac_banks is None else dac_banks
    stream = RngStream(config.seed, trial)
    v = _transform(config, stream)
    z = generate_streams(config.plan, config.covs, config.n_streams_tx, stream.child(_Z))
    psi = np.linspace(0.0, np.pi, config.n_angles)

    h = noise = None
    if config.receive:
        h = sample_rayleigh_channel(config.n_ant_rx or config.channel.shape[0], config.n_ant_tx, stream.child(_H)) \
            if config.resample_channel else config.channel
        noise = standard_complex_normal(stream.child(_XI).generator(), (config.n_fft, h.shape[0]))

    results = []
    for bank in dac_banks:
        x, r = run_transmitter(z, v, bank, config.w_tx)
        s = empirical_subband_covariance(r, config.plan)
        nu = _nu_from(s)
        reg = None
        if config.receive:
            adc = config.adc_bank(h, bank, stream.child(_CAL))
            z_hat = run_receiver(x, h, config.noise_std, config.w_rx, adc, v, noise=noise)
            reg = RegressionMoments(z.shape[1], z_hat.shape[1]).add(z, z_hat)
        results.append(
            TrialResult(
                empirical_s=s,
                empirical_nu=nu,
                empirical_aclr=aclr(nu, config.signal_band, config.adjacent_band),
                empirical_beam=beam_power(s[config.signal_band], psi),
                regression=reg,
            )
        )
    return results


def _aggregate(config: SystemConfig, trials: list[TrialResult], bank) -> SimulationResult:
    k = len(trials)
    mean_s = [sum(t.empirical_s[m] for t in trials) / k for m in range(config.plan.n_bands)]
    nu = _nu_from(mean_s)
    psi = np.linspace(0.0, np.pi, config.n_angles)

    def stderr(values):
        values = np.asarray(values, dtype=float)
        if k < 2:
            return np.zeros(values.shape[1:])
        return values.std(axis=0, ddof=1) / math.sqrt(k)

    per_db = np.array([aclr_db(t.empirical_nu, config.signal_band, config.adjacent_band) for t in trials])
    db_err = float(stderr(per_db)) if np.all(np.isfinite(per_db)) else 0.0
    reg = None
    if trials[0].regression is not None:
        reg = trials[0].regression
        for t in trials[1:]:
            reg = reg.merge(t.regression)
    return SimulationResult(
        trials=trials,
        mean_s=mean_s,
        nu=nu,
        nu_stderr=stderr([t.empirical_nu for t in trials]),
        aclr=aclr(nu, config.signal_band, config.adjacent_band),
        aclr_db=aclr_db(nu, config.signal_band, config.adjacent_band),
        aclr_db_stderr=db_err,
        angles=psi,
        beam=beam_power(mean_s[config.signal_band], psi),
        beam_stderr=stderr([t.empirical_beam for t in trials]),
        regression=reg,
        dac=list(bank),
    )


def sweep_dac(config: SystemConfig, dac_bits: Sequence, workers: int = 1) -> list[SimulationResult]:
    """Run ``config.trials`` trials once, evaluating every DAC resolution on them."""
    banks = [config.with_bits(dac_bits=b).dac_bank() for b in dac_bits]

    def job(t):
        return simulate_trial(config, t, banks)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            per_trial = list(pool.map(job, range(config.trials)))
    else:
        per_trial = [job(t) for t in range(config.trials)]
    return [_aggregate(config, [pt[i] for pt in per_trial], banks[i]) for i in range(len(banks))]


def run_trials(config: SystemConfig, workers: int = 1) -> SimulationResult:
    return sweep_dac(config, [config.dac_bits], workers)[0]
