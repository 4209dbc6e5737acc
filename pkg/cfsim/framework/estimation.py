"""
Channel estimation on both ends of the link.

Uplink: every AP estimates its channels to all users from orthonormal uplink pilots (MMSE, local to the AP).
Downlink: every user estimates its effective gain a_kk from beamformed downlink pilots (linear MMSE).

Pilot sequences are never materialized; only their projections are simulated, which is exact for
orthonormal pilots.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cfsim.framework.util import complex_normal


@dataclass
class EstimationStats:
    """
    c: MMSE scaling per (AP, user), gamma: variance of the channel estimate per (AP, user).
    """
    c: np.ndarray
    gamma: np.ndarray
    rho_up: float
    tau_up: int


@dataclass
class ChannelRealization:
    """
    True channels, their estimates and the estimation errors (g = g_hat + g_tilde).
    Either M x K or S x M x K for a batch of S realizations.
    """
    g: np.ndarray
    g_hat: np.ndarray
    g_tilde: np.ndarray


@dataclass
class EffectiveGains:
    """
    a[k, k'] = sum_m sqrt(eta_mk') g_mk conj(g_hat_mk'), i.e., what user k receives of the stream meant for user k'.
    K x K, or S x K x K for a batch.
    """
    a: np.ndarray

    @property
    def diagonal(self) -> np.ndarray:
        return np.diagonal(self.a, axis1=-2, axis2=-1)


@dataclass
class GainMoments:
    """
    Closed-form moments of the effective gains for a given power control.

    mean_akk: E{a_kk} = sum_m sqrt(eta_mk) gamma_mk
    varsigma: varsigma[k, k'] = sum_m eta_mk' beta_mk gamma_mk' (Var{a_kk} on the diagonal, E{|a_kk'|^2} elsewhere)
    err_var: E{|a_kk - a_hat_kk|^2} of the downlink LMMSE estimate
    pilot_snr: tau_dp * rho_dp used for err_var
    """
    mean_akk: np.ndarray
    varsigma: np.ndarray
    err_var: np.ndarray
    pilot_snr: float

    @property
    def var_akk(self) -> np.ndarray:
        return np.diagonal(self.varsigma).copy()

    def interference(self) -> np.ndarray:
        """sum over k' != k of varsigma[k, k'] for each user k"""
        return self.varsigma.sum(axis=1) - np.diagonal(self.varsigma)


def mmse_scale(beta: np.ndarray, tau_up: int, rho_up: float) -> np.ndarray:
    pilot_snr = tau_up * rho_up
    if pilot_snr <= 0:
        raise ValueError(f"[-] tau_up * rho_up must be positive (got {pilot_snr}).")
    beta = np.asarray(beta, dtype=float)
    return np.sqrt(pilot_snr) * beta / (pilot_snr * beta + 1.0)


def estimate_variance(beta: np.ndarray, c: np.ndarray, tau_up: int, rho_up: float) -> np.ndarray:
    return np.sqrt(tau_up * rho_up) * np.asarray(beta, dtype=float) * c


def estimation_stats(beta: np.ndarray, tau_up: int, rho_up: float) -> EstimationStats:
    c = mmse_scale(beta, tau_up, rho_up)
    return EstimationStats(c=c, gamma=estimate_variance(beta, c, tau_up, rho_up), rho_up=rho_up, tau_up=tau_up)


def simulate_uplink_estimates(g: np.ndarray, stats: EstimationStats, rng: np.random.Generator) -> ChannelRealization:
    """
    Draws the projected uplink pilot noise and forms the MMSE estimates of g.
    :param g: True channels, M x K or S x M x K
    :param stats: Statistics for the beta that generated g
    :param rng: Stream for the pilot noise
    """
    noise = complex_normal(rng, g.shape)
    g_hat = stats.c * (np.sqrt(stats.tau_up * stats.rho_up) * g + noise)
    return ChannelRealization(g=g, g_hat=g_hat, g_tilde=g - g_hat)


def effective_gains(realization: ChannelRealization, eta: np.ndarray) -> EffectiveGains:
    """
    Effective channel gains after conjugate beamforming with power control eta.
    """
    eta = np.asarray(eta, dtype=float)
    if realization.g.shape[-2:] != eta.shape or realization.g_hat.shape != realization.g.shape:
        raise ValueError(f"[-] Dimension mismatch: channels {realization.g.shape}, estimates "
                         f"{realization.g_hat.shape}, eta {eta.shape}.")
    precoder = np.sqrt(eta) * np.conj(realization.g_hat)
    return EffectiveGains(np.einsum("...mk,...mj->...kj", realization.g, precoder))


def gain_moments(beta: np.ndarray, gamma: np.ndarray, eta: np.ndarray, tau_dp: int, rho_dp: float) -> GainMoments:
    beta = np.asarray(beta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    eta = np.asarray(eta, dtype=float)
    pilot_snr = tau_dp * rho_dp
    mean_akk = np.sum(np.sqrt(eta) * gamma, axis=0)
    varsigma = beta.T @ (eta * gamma)
    var_akk = np.diagonal(varsigma)
    err_var = var_akk / (pilot_snr * var_akk + 1.0)
    return GainMoments(mean_akk=mean_akk, varsigma=varsigma, err_var=err_var, pilot_snr=pilot_snr)


def downlink_pilot_observation(a_kk, tau_dp: int, rho_dp: float, rng: np.random.Generator):
    """
    Projection of the received beamformed pilot onto the user's own pilot: sqrt(tau_dp rho_dp) a_kk + n, n ~ CN(0,1).
    Accepts a scalar or an array of gains.
    """
    pilot_snr = tau_dp * rho_dp
    if pilot_snr < 0:
        raise ValueError(f"[-] tau_dp * rho_dp must be nonnegative (got {pilot_snr}).")
    a_kk = np.asarray(a_kk)
    y = np.sqrt(pilot_snr) * a_kk + complex_normal(rng, a_kk.shape)
    return complex(y) if y.ndim == 0 else y


def lmmse_effective_gain(y_check, moments: GainMoments, k: int = None):
    """
    Linear MMSE estimate of a_kk from the projected downlink pilot.
    :param y_check: Observation of user k, or an array whose last axis runs over all users if k is None
    :param k: User index
    """
    if k is None:
        var, mean = np.diagonal(moments.varsigma), moments.mean_akk
    else:
        var, mean = moments.varsigma[k, k], moments.mean_akk[k]
    snr = moments.pilot_snr
    a_hat = (np.sqrt(snr) * var * np.asarray(y_check) + mean) / (snr * var + 1.0)
    return complex(a_hat) if np.ndim(a_hat) == 0 else a_hat
