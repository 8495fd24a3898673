"""Compare an FFT transform with the Haar transform the theory assumes.

Prints ACLR and in-band covariance error for both against the same linearized
prediction. This is a report: FFT agreement is not guaranteed by the theory.
"""

import argparse
import math

import numpy as np

from qmimo._linalg import rel_frobenius
from qmimo.linearize import estimate_linear_model, make_tx_chain
from qmimo.randcore import RngStream
from qmimo.simkit import SystemConfig, sweep_dac
from qmimo.spectro import SubbandPlan, aclr_db, array_response, power_fractions, spectral_covariances


def main(trials, seed):
    n_t = 16
    e = array_response(n_t, math.pi / 4)
    covs = [np.outer(e, e.conj()) / n_t, np.zeros((n_t, n_t))]
    bits = [1, 2, 3, 4, 5, 6]
    print("bits  aclr_theory  aclr_haar (se)     aclr_fft (se)      S1_err_haar  S1_err_fft")
    runs = {}
    for transform in ("haar", "fft"):
        cfg = SystemConfig(plan=SubbandPlan.contiguous([512, 512]), covs=covs, w_tx=np.eye(n_t),
                           transform=transform, trials=trials, seed=seed)
        runs[transform] = (cfg, sweep_dac(cfg, bits))
    cfg = runs["haar"][0]
    for i, b in enumerate(bits):
        haar, fft = runs["haar"][1][i], runs["fft"][1][i]
        m = estimate_linear_model(make_tx_chain(cfg.w_tx, haar.dac), cfg.average_cov, rng=RngStream(seed, 2**62))
        s = spectral_covariances(m, covs, cfg.deltas)
        th = aclr_db(power_fractions(s))
        print(f"{b:>4}  {th:11.3f}  {haar.aclr_db:8.3f} ({haar.aclr_db_stderr:.3f})  "
              f"{fft.aclr_db:8.3f} ({fft.aclr_db_stderr:.3f})  "
              f"{rel_frobenius(haar.mean_s[0], s.per_subband[0]):11.4f}  {rel_frobenius(fft.mean_s[0], s.per_subband[0]):10.4f}")


if __name__ == "__main__":
    p = argparse.ArgumentParser()
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=2021)
    a = p.parse_args()
    main(a.trials, a.seed)
