from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

import numpy as np

from cfsim.framework.estimation import GainMoments, ChannelRealization, effective_gains, \
    downlink_pilot_observation, lmmse_effective_gain


class CsiMode(Enum):
    """What the users know about their effective channel gain."""
    STATISTICAL = "statistical"
    BEAMFORMING_TRAINING = "beamforming_training"
    PERFECT = "perfect"


@dataclass
class RateReport:
    """
    Per-user rates of one drop under one CSI mode.
    gross_se in bit/s/Hz, net_throughput in bit/s, overhead in samples per coherence interval.
    std_error is the Monte Carlo standard error of gross_se (zero for closed-form rates).
    """
    mode: CsiMode
    gross_se: np.ndarray
    net_throughput: np.ndarray
    overhead: int
    std_error: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.std_error is None:
            self.std_error = np.zeros_like(self.gross_se)


def overhead(mode: CsiMode, tau_up: int, tau_dp: int) -> int:
    """
    Pilot samples spent per coherence interval. Only Beamforming Training sends downlink pilots.
    """
    return tau_up + tau_dp if mode == CsiMode.BEAMFORMING_TRAINING else tau_up


def statistical_sinr(beta: np.ndarray, gamma: np.ndarray, eta: np.ndarray, rho_d: float) -> np.ndarray:
    """
    SINR of every user when only the mean of the effective gain is known.
    Interference at user k only depends on the power sum_k' eta_mk' gamma_mk' radiated by each AP.
    """
    signal = rho_d * np.sum(np.sqrt(eta) * gamma, axis=0) ** 2
    radiated = np.sum(eta * gamma, axis=1)
    interference = rho_d * (beta.T @ radiated)
    return signal / (interference + 1.0)


def se_statistical(beta: np.ndarray, gamma: np.ndarray, eta: np.ndarray, rho_d: float) -> np.ndarray:
    return np.log2(1.0 + statistical_sinr(beta, gamma, eta, rho_d))


def bt_rate_samples(moments: GainMoments, tau_dp: int, rho_dp: float, rho_d: float, a_kk: np.ndarray,
                    rng: np.random.Generator) -> np.ndarray:
    """
    Instantaneous log2 terms of the Beamforming Training rate, one per joint draw of (a_kk, pilot noise).
    :param a_kk: S x K effective gains
    :return: S x K values whose mean over S is the achievable rate
    """
    if np.size(a_kk) == 0:
        raise ValueError(f"[-] At least one realization is needed.")
    a_kk = np.atleast_2d(a_kk)
    y_check = downlink_pilot_observation(a_kk, tau_dp, rho_dp, rng)
    a_hat = lmmse_effective_gain(y_check, moments)
    denominator = rho_d * moments.err_var + rho_d * moments.interference() + 1.0
    return np.log2(1.0 + rho_d * np.abs(a_hat) ** 2 / denominator)


def se_beamforming_training(moments: GainMoments, tau_dp: int, rho_dp: float, rho_d: float, a_kk: np.ndarray,
                            rng: np.random.Generator) -> np.ndarray:
    """
    Achievable rate with downlink beamforming training, averaged over the estimate a_hat_kk.
    """
    return np.mean(bt_rate_samples(moments, tau_dp, rho_dp, rho_d, a_kk, rng), axis=0)


def perfect_rate_samples(a: np.ndarray, rho_d: float) -> np.ndarray:
    """
    Instantaneous log2 terms of the genie rate.
    :param a: S x K x K effective gains
    :return: S x K
    """
    power = np.abs(a) ** 2
    signal = np.diagonal(power, axis1=-2, axis2=-1)
    interference = power.sum(axis=-1) - signal
    return np.log2(1.0 + rho_d * signal / (rho_d * interference + 1.0))


def se_perfect(realizations: Iterable[ChannelRealization], eta: np.ndarray, rho_d: float,
               n_samples: int) -> np.ndarray:
    """
    Genie rate, averaged over the first n_samples small-scale realizations of the stream.
    Each item of the stream may be a single realization or a batch.
    """
    if n_samples < 1:
        raise ValueError(f"[-] n_samples must be at least 1 (got {n_samples}).")
    total = None
    used = 0
    for realization in realizations:
        a = effective_gains(realization, eta).a
        if a.ndim == 2:
            a = a[np.newaxis]
        terms = perfect_rate_samples(a[:n_samples - used], rho_d)
        total = terms.sum(axis=0) if total is None else total + terms.sum(axis=0)
        used += terms.shape[0]
        if used >= n_samples:
            return total / used
    raise ValueError(f"[-] Realization stream ended after {used} of {n_samples} samples.")


def net_throughput(gross_se: np.ndarray, bandwidth: float, tau: int, tau_oh: int) -> np.ndarray:
    """
    Per-user net throughput in bit/s: half of the coherence interval carries downlink data, minus the pilot overhead.
    """
    if not 0 <= tau_oh < tau:
        raise ValueError(f"[-] Pilot overhead {tau_oh} must lie in [0, {tau}).")
    return bandwidth * (1.0 - tau_oh / tau) / 2.0 * np.asarray(gross_se, dtype=float)


def mean_and_std_error(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Column means of an S x K sample matrix together with their standard errors.
    """
    n = samples.shape[0]
    mean = samples.mean(axis=0)
    if n < 2:
        return mean, np.zeros_like(mean)
    return mean, samples.std(axis=0, ddof=1) / np.sqrt(n)
