"""The five runnable studies: theory next to simulation, as plain tables."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._linalg import rel_frobenius
from .config import ExperimentConfig, load_matrix
from .linearize import (
    LinearModel,
    calibrate_adc,
    calibrate_dac,
    estimate_linear_model,
    make_e2e_chain,
    make_tx_chain,
)
from .randcore import RngStream, sample_rayleigh_channel
from .rate import rate_lower_bound, snr_to_noise_var, subband_capacity
from .simkit import SystemConfig, sweep_dac
from .spectro import (
    SubbandPlan,
    aclr_db,
    array_response,
    beam_power,
    nu_floor,
    power_fractions,
    spectral_covariances,
)

__all__ = ["ExperimentOutput", "build_system", "run_experiment", "transmit_model", "RUNNERS"]

# stream ids reserved outside the per-trial range
_THEORY_STREAM = 2**62
_CHANNEL_STREAM = 2**62 + 1


@dataclass
class ExperimentOutput:
    header: list
    rows: list
    summary: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.summary.get("checks", {}).values())


def _covariance(spec: dict, n_streams: int, n_ant: int) -> np.ndarray:
    if spec["kind"] == "zero":
        return np.zeros((n_streams, n_streams), dtype=complex)
    if spec["kind"] == "identity":
        return float(spec.get("scale", 1.0)) * np.eye(n_streams, dtype=complex)
    e = array_response(n_ant, float(spec["angle"]))
    return float(spec.get("scale", 1.0)) * np.outer(e, e.conj()) / n_ant


def _channel(cfg: ExperimentConfig) -> np.ndarray | None:
    s = cfg.system
    if s.channel == "identity":
        return np.eye(s.n_ant_rx, s.n_ant_tx, dtype=complex)
    if s.channel == "rayleigh":
        return sample_rayleigh_channel(s.n_ant_rx, s.n_ant_tx, RngStream(cfg.seed, _CHANNEL_STREAM))
    return load_matrix(cfg.resolve_path(s.channel))


def _matrix_or_identity(cfg, value, rows, cols):
    if value == "identity":
        return np.eye(rows, cols, dtype=complex)
    m = load_matrix(cfg.resolve_path(value))
    if m.shape != (rows, cols):
        raise ValueError(f"{value}: expected a {rows}x{cols} matrix, got {m.shape}")
    return m


def build_system(cfg: ExperimentConfig, receive: bool = False, resample: bool | None = None) -> SystemConfig:
    """Translate a validated experiment config into a simulation config."""
    s = cfg.system
    covs = [_covariance(c, s.n_streams_tx, s.n_ant_tx) for c in s.covariances]
    w_tx = _matrix_or_identity(cfg, s.precoder, s.n_ant_tx, s.n_streams_tx)
    kw = {}
    if receive:
        resample = (s.resample_channel and s.channel == "rayleigh") if resample is None else resample
        h = None if resample else _channel(cfg)
        kw = dict(
            channel=h,
            resample_channel=resample,
            noise_std=s.noise_std,
            w_rx=_matrix_or_identity(cfg, s.combiner, s.n_streams_rx, s.n_ant_rx),
            adc_bits=s.adc_bits,
            adc_step=s.adc_step,
        )
        if s.snr_db is not None:
            if h is not None:
                kw["noise_std"] = math.sqrt(snr_to_noise_var(h, covs[0], s.snr_db))
            else:
                # Rayleigh average: E tr(H P H^H) = N_r tr(P)
                kw["noise_std"] = math.sqrt(float(np.real(np.trace(covs[0]))) / 10.0 ** (s.snr_db / 10.0))
    sysc = SystemConfig(
        plan=SubbandPlan.contiguous(s.bands),
        covs=covs,
        w_tx=w_tx,
        dac_bits=s.dac_bits,
        dac_step=s.dac_step,
        transform=s.transform,
        pin_v=s.pin_v,
        trials=s.trials,
        calibration_samples=s.calibration_samples,
        seed=cfg.seed,
        n_angles=cfg.sweep.n_angles,
        **kw,
    )
    return sysc


def transmit_model(system: SystemConfig, bank, stream: RngStream) -> LinearModel:
    return estimate_linear_model(
        make_tx_chain(system.w_tx, bank), system.average_cov, system.calibration_samples, stream
    )


def _bits_label(b):
    return "inf" if math.isinf(b) else int(b)


def _check(ok: bool, **detail) -> dict:
    return {"pass": bool(ok), **detail}


def _spectral(cfg: ExperimentConfig):
    system = build_system(cfg)
    bits = cfg.sweep.bits
    sims = sweep_dac(system, bits, cfg.workers)
    theory = []
    for b, sim in zip(bits, sims):
        model = transmit_model(system, sim.dac, RngStream(cfg.seed, _THEORY_STREAM))
        theory.append((model, spectral_covariances(model, system.covs, system.deltas)))
    return system, bits, sims, theory


def beam_pattern(cfg: ExperimentConfig) -> ExperimentOutput:
    system, bits, sims, theory = _spectral(cfg)
    sb = system.signal_band
    spec0 = cfg.system.covariances[sb]
    steer = float(spec0.get("angle", math.pi / 4))
    rows, per_bits = [], {}
    for b, sim, (model, s) in zip(bits, sims, theory):
        bf = beam_power(s.per_subband[sb], sim.angles)
        for psi, th, m, e in zip(sim.angles, bf, sim.beam, sim.beam_stderr):
            rows.append([float(psi), _bits_label(b), float(th), float(m), float(e)])
        per_bits[str(_bits_label(b))] = {
            "s_rel_frobenius": rel_frobenius(sim.mean_s[sb], s.per_subband[sb]),
            "beam_max_dev_rel_peak": float(np.abs(bf - sim.beam).max() / bf.max()),
            "main_lobe_theory": float(beam_power(s.per_subband[sb], steer)),
            "main_lobe_sim": float(beam_power(sim.mean_s[sb], steer)),
        }
    tol = cfg.tolerances
    finite = sorted(b for b in bits if not math.isinf(b))
    lobes = [per_bits[str(_bits_label(b))]["main_lobe_theory"] for b in finite]
    checks = {
        "s_rel_frobenius": _check(all(v["s_rel_frobenius"] <= tol.s_rel_frobenius for v in per_bits.values()),
                                  tolerance=tol.s_rel_frobenius),
        "beam_overlay": _check(all(v["beam_max_dev_rel_peak"] <= tol.beam_rel_peak for v in per_bits.values()),
                               tolerance=tol.beam_rel_peak),
        "main_lobe_monotone": _check(all(x < y for x, y in zip(lobes, lobes[1:]))),
    }
    return ExperimentOutput(
        ["angle_rad", "bits", "bf_theory", "bf_sim_mean", "bf_sim_stderr"],
        rows,
        {"per_bits": per_bits, "steer_angle_rad": steer, "checks": checks},
    )


def aclr_sweep(cfg: ExperimentConfig) -> ExperimentOutput:
    system, bits, sims, theory = _spectral(cfg)
    sb, ab = system.signal_band, system.adjacent_band
    rows, per_bits = [], {}
    for b, sim, (model, s) in zip(bits, sims, theory):
        nu = power_fractions(s)
        th = aclr_db(nu, sb, ab)
        rows.append([_bits_label(b), th, sim.aclr_db, sim.aclr_db_stderr])
        floor = nu_floor(model, system.average_cov, system.deltas)
        per_bits[str(_bits_label(b))] = {
            "aclr_db_theory": th,
            "aclr_db_sim": sim.aclr_db,
            "aclr_db_stderr": sim.aclr_db_stderr,
            "abs_diff_db": abs(th - sim.aclr_db) if math.isfinite(th) else (0.0 if th == sim.aclr_db else math.inf),
            "nu_theory": nu.tolist(),
            "nu_sim": sim.nu.tolist(),
            "nu_sim_stderr": sim.nu_stderr.tolist(),
            "nu_floor": floor.tolist(),
        }
    tol = cfg.tolerances
    finite = sorted(b for b in bits if not math.isinf(b))
    curve = [per_bits[str(_bits_label(b))]["aclr_db_theory"] for b in finite]
    checks = {
        "theory_vs_sim": _check(all(v["abs_diff_db"] <= tol.aclr_db for v in per_bits.values()), tolerance_db=tol.aclr_db),
        "aclr_increasing": _check(all(x < y for x, y in zip(curve, curve[1:]))),
        "sim_above_floor": _check(all(
            all(n + 2 * e >= f for n, e, f in zip(v["nu_sim"], v["nu_sim_stderr"], v["nu_floor"]))
            for v in per_bits.values()
        )),
    }
    return ExperimentOutput(["bits", "aclr_db_theory", "aclr_db_sim", "stderr"], rows,
                            {"per_bits": per_bits, "checks": checks})


def _rate_realization(cfg: ExperimentConfig, system: SystemConfig, r: int, bits, snrs):
    """Bound and capacity for one channel draw over the SNR x bits grid."""
    stream = RngStream(cfg.seed, r)
    s = cfg.system
    h = sample_rayleigh_channel(s.n_ant_rx, s.n_ant_tx, stream.child(2)) if system.resample_channel else system.channel
    p = system.average_cov
    covs, deltas = system.covs, system.deltas
    out = np.zeros((len(snrs), len(bits), 2))
    for j, snr in enumerate(snrs):
        noise_var = snr_to_noise_var(h, covs[system.signal_band], snr)
        sigma = math.sqrt(noise_var)
        cap = subband_capacity(h, covs, deltas, noise_var)
        for i, b in enumerate(bits):
            dac = calibrate_dac(b, p)
            adc = calibrate_adc(b, system.w_tx, dac, h, sigma, p, stream.child(1000 + j),
                                samples=min(system.calibration_samples, 100_000))
            phi = make_e2e_chain(system.w_tx, dac, h, sigma, system.w_rx, adc)
            # same stream for every resolution: common random numbers across bits
            model = estimate_linear_model(phi, p, system.calibration_samples, stream.child(2000 + j))
            out[j, i] = rate_lower_bound(model, covs, deltas), cap
    return out


def rate_sweep(cfg: ExperimentConfig) -> ExperimentOutput:
    system = build_system(cfg, receive=True)
    bits, snrs = cfg.sweep.bits, cfg.sweep.snr_db
    n = system.trials

    def job(r):
        return _rate_realization(cfg, system, r, bits, snrs)

    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            per = np.stack(list(pool.map(job, range(n))))
    else:
        per = np.stack([job(r) for r in range(n)])
    mean = per.mean(axis=0)
    err = per.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(mean)

    rows, points = [], []
    for j, snr in enumerate(snrs):
        for i, b in enumerate(bits):
            rows.append([snr, _bits_label(b), float(mean[j, i, 0]), float(mean[j, i, 1])])
            points.append({"snr_db": snr, "bits": _bits_label(b), "rate_bound": float(mean[j, i, 0]),
                           "rate_bound_stderr": float(err[j, i, 0]), "capacity": float(mean[j, i, 1])})
    slack = cfg.tolerances.rate_slack
    order = np.argsort([b for b in bits])
    bound, cap = mean[..., 0], mean[..., 1]
    checks = {
        "bound_below_capacity": _check(bool(np.all(per[..., 0] <= per[..., 1] * (1 + slack) + 1e-12)), slack=slack),
        "monotone_in_bits": _check(bool(np.all(bound[:, order][:, :-1] <= bound[:, order][:, 1:] * (1 + slack))),
                                   slack=slack),
    }
    inf_cols = [i for i, b in enumerate(bits) if math.isinf(b)]
    if inf_cols:
        i = inf_cols[0]
        rel = np.abs(per[:, :, i, 0] - per[:, :, i, 1]) / per[:, :, i, 1]
        checks["infinite_bits_equals_capacity"] = _check(bool(np.all(rel <= 1e-9)), max_rel=float(rel.max()))
    if 3 in bits and -10.0 in snrs and 20.0 in snrs:
        i = bits.index(3)
        lo, hi = snrs.index(-10.0), snrs.index(20.0)
        checks["low_snr_tightness_3bit"] = _check(bound[lo, i] / cap[lo, i] > bound[hi, i] / cap[hi, i],
                                                  ratio_m10db=float(bound[lo, i] / cap[lo, i]),
                                                  ratio_p20db=float(bound[hi, i] / cap[hi, i]))
    return ExperimentOutput(["snr_db", "bits", "rate_bound", "capacity"], rows,
                            {"points": points, "realizations": n, "checks": checks})


def validate_linearization(cfg: ExperimentConfig) -> ExperimentOutput:
    """Regression fit on simulated (Z, Z_hat) rows against the Monte Carlo (A, T)."""
    system = build_system(cfg, receive=True, resample=False)
    rows, per_bits = [], {}
    for b in cfg.sweep.bits:
        sysb = system.with_bits(dac_bits=b, adc_bits=b)
        sim = sweep_dac(sysb, [b], cfg.workers)[0]
        dac = sim.dac
        adc = sysb.adc_bank(sysb.channel, dac, RngStream(cfg.seed, 0).child(4))
        phi = make_e2e_chain(sysb.w_tx, dac, sysb.channel, sysb.noise_std, sysb.w_rx, adc)
        model = estimate_linear_model(phi, sysb.average_cov, sysb.calibration_samples, RngStream(cfg.seed, _THEORY_STREAM))
        fit = sim.fitted_model
        if model.exact and np.linalg.norm(model.noise_cov) == 0:
            err_t = float(np.linalg.norm(fit.noise_cov))
        else:
            err_t = rel_frobenius(fit.noise_cov, model.noise_cov)
        err_a = rel_frobenius(fit.gain, model.gain)
        rows.append([_bits_label(b), err_a, err_t, float(np.real(np.trace(model.noise_cov))),
                     float(np.real(np.trace(fit.noise_cov)))])
        per_bits[str(_bits_label(b))] = {"rel_err_gain": err_a, "rel_err_noise_cov": err_t, "rows": fit.sample_count}
    tol = cfg.tolerances.model_rel_frobenius
    checks = {"fit_matches_model": _check(
        all(v["rel_err_gain"] <= tol and v["rel_err_noise_cov"] <= tol for v in per_bits.values()), tolerance=tol)}
    return ExperimentOutput(["bits", "rel_err_gain", "rel_err_noise_cov", "trace_noise_theory", "trace_noise_fit"],
                            rows, {"per_bits": per_bits, "noise_std": system.noise_std, "checks": checks})


def custom(cfg: ExperimentConfig) -> ExperimentOutput:
    """Per-band power fractions for the configured DAC, theory vs simulation."""
    system = build_system(cfg)
    sim = sweep_dac(system, [system.dac_bits], cfg.workers)[0]
    model = transmit_model(system, sim.dac, RngStream(cfg.seed, _THEORY_STREAM))
    nu = power_fractions(spectral_covariances(model, system.covs, system.deltas))
    floor = nu_floor(model, system.average_cov, system.deltas)
    rows = [[m, float(nu[m]), float(sim.nu[m]), float(sim.nu_stderr[m]), float(floor[m])] for m in range(nu.size)]
    summary = {"aclr_db_theory": aclr_db(nu) if nu.size > 1 else None,
               "aclr_db_sim": sim.aclr_db if nu.size > 1 else None,
               "checks": {}}
    return ExperimentOutput(["band", "nu_theory", "nu_sim", "nu_sim_stderr", "nu_floor"], rows, summary)


RUNNERS = {
    "beam_pattern": beam_pattern,
    "aclr_sweep": aclr_sweep,
    "rate_sweep": rate_sweep,
    "validate_linearization": validate_linearization,
    "custom": custom,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentOutput:
    return RUNNERS[cfg.experiment](cfg)
