from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from concurrent.futures.process import BrokenProcessPool
from dataclasses import dataclass, field
from functools import partial
from typing import Iterator

import numpy as np
from scipy import stats as sps

import cfsim
from cfsim.exception import CFSimException, DropException, ConfigException
from cfsim.framework import channel, estimation, rates
from cfsim.framework.estimation import EstimationStats, GainMoments
from cfsim.framework.power_control import PowerPolicy, PowerCoefficients, uniform_eta, maxmin_eta, \
    check_power_constraint
from cfsim.framework.rates import CsiMode, RateReport
from cfsim.framework.scenario import SystemConfig, Drop, generate_drop
from cfsim.framework.util import RngRole, substream, sample_blocks, config_hash

cfsimlog = logging.getLogger(__name__)

# Named percentiles of the per-user net throughput
PERCENTILES = {"p05": 0.05, "p50": 0.5}


@dataclass
class DropResult:
    index: int
    drop: Drop
    power: PowerCoefficients
    reports: dict[CsiMode, RateReport]


@dataclass
class ExperimentResult:
    """
    Outcome of run_experiment: one DropResult per drop, in drop order.
    Samples of a mode are pooled over drops and users, drop-major.
    """
    config: SystemConfig
    modes: tuple[CsiMode, ...]
    policy: PowerPolicy
    drops: list[DropResult]
    metadata: dict = field(default_factory=dict)

    def records(self) -> Iterator[tuple[int, int, CsiMode, float, float]]:
        """Yields (drop, user, mode, gross SE, net throughput) rows, ordered by drop, user and mode."""
        for result in self.drops:
            for user in range(result.drop.num_users):
                for mode in self.modes:
                    report = result.reports[mode]
                    yield result.index, user, mode, float(report.gross_se[user]), float(report.net_throughput[user])

    def samples(self, mode: CsiMode) -> np.ndarray:
        if mode not in self.modes:
            raise ConfigException(f"[-] Mode '{mode.value}' was not evaluated in this experiment.")
        return np.concatenate([result.reports[mode].net_throughput for result in self.drops])

    def relative_gain(self, base: CsiMode, other: CsiMode, p: float) -> float:
        """(other - base) / base of the per-user net throughput at percentile p"""
        reference = percentile(self.samples(base), p)
        return (percentile(self.samples(other), p) - reference) / reference

    def mode_ordering_violations(self, sigmas: float = 2.0) -> list[tuple[int, int, str]]:
        """
        Lists every (drop, user, pair) for which statistical <= beamforming_training <= perfect does not hold
        within `sigmas` combined Monte Carlo standard errors of the gross SE.
        """
        order = [mode for mode in (CsiMode.STATISTICAL, CsiMode.BEAMFORMING_TRAINING, CsiMode.PERFECT)
                 if mode in self.modes]
        violations = []
        for result in self.drops:
            for lower, upper in zip(order, order[1:]):
                low, high = result.reports[lower], result.reports[upper]
                slack = sigmas * np.sqrt(low.std_error ** 2 + high.std_error ** 2)
                for user in np.flatnonzero(low.gross_se > high.gross_se + slack):
                    violations.append((result.index, int(user), f"{lower.value}>{upper.value}"))
        return violations

    def summary(self) -> dict:
        summary = {
            "percentiles": {mode.value: {name: percentile(self.samples(mode), p) for name, p in PERCENTILES.items()}
                            for mode in self.modes},
            "mean": {mode.value: float(np.mean(self.samples(mode))) for mode in self.modes},
            "samples_per_mode": len(self.drops) * self.config.num_users,
            "gains": {},
            "metadata": self.metadata,
        }
        if CsiMode.STATISTICAL in self.modes:
            for other in (CsiMode.BEAMFORMING_TRAINING, CsiMode.PERFECT):
                if other in self.modes:
                    summary["gains"][f"{other.value}_over_statistical"] = {
                        name: self.relative_gain(CsiMode.STATISTICAL, other, p) for name, p in PERCENTILES.items()}
        return summary


@dataclass
class CdfSummary:
    """
    Empirical CDF on the distinct sample values: cdf[i] is the fraction of samples <= values[i].
    """
    values: np.ndarray
    cdf: np.ndarray
    percentiles: dict[str, float]

    def __call__(self, x: float) -> float:
        index = np.searchsorted(self.values, x, side="right")
        return 0.0 if index == 0 else float(self.cdf[index - 1])


@dataclass
class GaussianityReport:
    """
    Kolmogorov-Smirnov distances of the effective gains to their Gaussian approximations.
    ks_direct[k]: Re(a_kk) vs N(mean_akk[k], approx_var[k])
    ks_cross[k, k']: Re(a_kk') vs N(0, varsigma[k, k'] / 2), NaN on the diagonal
    im_re_ratio[k]: mean |Im(a_kk)| / mean |Re(a_kk)|
    """
    ks_direct: np.ndarray
    ks_cross: np.ndarray
    im_re_ratio: np.ndarray
    mean_akk: np.ndarray
    approx_var: np.ndarray
    varsigma: np.ndarray
    gains: np.ndarray = None

    def passes(self, threshold: float) -> bool:
        return bool(np.all(self.ks_direct < threshold) and np.all(np.nan_to_num(self.ks_cross) < threshold))


def empirical_cdf(samples) -> CdfSummary:
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise ValueError(f"[-] Cannot build a CDF from an empty sample set.")
    values, counts = np.unique(samples, return_counts=True)
    cdf = np.cumsum(counts) / samples.size
    cdf[-1] = 1.0
    return CdfSummary(values, cdf, {name: percentile(samples, p) for name, p in PERCENTILES.items()})


def percentile(samples, p: float) -> float:
    """
    Order statistic at fraction p with linear interpolation between the closest ranks.
    """
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise ValueError(f"[-] Cannot take a percentile of an empty sample set.")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"[-] Percentile fraction must lie in [0, 1] (got {p}).")
    return float(np.quantile(samples, p, method="linear"))


def prepare_drop(config: SystemConfig, drop_index: int,
                 policy: PowerPolicy) -> tuple[Drop, EstimationStats, PowerCoefficients]:
    """
    Generates drop `drop_index` of the experiment, its uplink estimation statistics and its power control.
    """
    drop = generate_drop(config, substream(config.rng_seed, drop_index, RngRole.GEOMETRY),
                         substream(config.rng_seed, drop_index, RngRole.SHADOWING))
    est = estimation.estimation_stats(drop.beta, config.ul_pilot_len, config.rho_up)
    if policy == PowerPolicy.MAXMIN:
        power = maxmin_eta(drop.beta, est.gamma, config.rho_d, config.pc_tol, config.pc_max_iter)
    else:
        power = uniform_eta(est.gamma)
    ok, margins = check_power_constraint(power.eta, est.gamma)
    if not ok:
        raise CFSimException(f"[-] Power coefficients violate the per-AP constraint (worst margin {margins.min():.3g}).")
    return drop, est, power


def draw_effective_gains(config: SystemConfig, drop_index: int, drop: Drop, est: EstimationStats,
                         eta: np.ndarray, n_samples: int) -> Iterator[tuple[int, np.ndarray]]:
    """
    Yields (block index, S x K x K effective gains) for n_samples small-scale realizations of a drop.
    """
    sqrt_beta = np.sqrt(drop.beta)
    for block, size in sample_blocks(n_samples):
        h = channel.draw_small_scale(substream(config.rng_seed, drop_index, RngRole.SMALL_SCALE, block),
                                     drop.num_aps, drop.num_users, size).h
        realization = estimation.simulate_uplink_estimates(
            sqrt_beta * h, est, substream(config.rng_seed, drop_index, RngRole.UPLINK_PILOT_NOISE, block))
        yield block, estimation.effective_gains(realization, eta).a


def evaluate_drop(config: SystemConfig, modes: tuple[CsiMode, ...], policy: PowerPolicy,
                  drop_index: int) -> DropResult:
    """
    Evaluates the requested CSI modes on one drop. Any failure is re-raised as DropException.
    """
    try:
        drop, est, power = prepare_drop(config, drop_index, policy)
        rho_d, rho_dp = config.rho_d, config.rho_dp
        tau_up, tau_dp = config.ul_pilot_len, config.dl_pilot_len

        gross = {}
        if CsiMode.STATISTICAL in modes:
            gross[CsiMode.STATISTICAL] = (rates.se_statistical(drop.beta, est.gamma, power.eta, rho_d),
                                          np.zeros(drop.num_users))

        sampled = [mode for mode in modes if mode != CsiMode.STATISTICAL]
        if sampled:
            moments: GainMoments = estimation.gain_moments(drop.beta, est.gamma, power.eta, tau_dp, rho_dp)
            terms = {mode: [] for mode in sampled}
            for block, a in draw_effective_gains(config, drop_index, drop, est, power.eta,
                                                 config.num_channel_samples):
                if CsiMode.BEAMFORMING_TRAINING in terms:
                    pilot_rng = substream(config.rng_seed, drop_index, RngRole.DOWNLINK_PILOT_NOISE, block)
                    terms[CsiMode.BEAMFORMING_TRAINING].append(
                        rates.bt_rate_samples(moments, tau_dp, rho_dp, rho_d,
                                              np.diagonal(a, axis1=-2, axis2=-1), pilot_rng))
                if CsiMode.PERFECT in terms:
                    terms[CsiMode.PERFECT].append(rates.perfect_rate_samples(a, rho_d))
            for mode, chunks in terms.items():
                gross[mode] = rates.mean_and_std_error(np.concatenate(chunks))

        reports = {}
        for mode in modes:
            se, std_error = gross[mode]
            tau_oh = rates.overhead(mode, tau_up, tau_dp)
            reports[mode] = RateReport(mode=mode, gross_se=se,
                                       net_throughput=rates.net_throughput(se, config.bandwidth, config.coherence_len,
                                                                           tau_oh),
                                       overhead=tau_oh, std_error=std_error)
    except DropException:
        raise
    except (CFSimException, ValueError, ArithmeticError) as e:
        raise DropException(str(e).removeprefix("[-] "), drop_index) from e

    cfsimlog.info(f"[+] Drop {drop_index} done")
    return DropResult(drop_index, drop, power, reports)


def run_experiment(config: SystemConfig, modes=None, pc_policy=None, threads: int = None) -> ExperimentResult:
    """
    Runs config.num_drops drops and evaluates the requested CSI modes on each.
    Results only depend on (config, seed): every drop draws from its own substreams and results are
    collected in drop order, whatever the number of worker processes.
    :param modes: CSI modes (CsiMode or their names), defaults to config.modes
    :param pc_policy: PowerPolicy or its name, defaults to config.power_control
    :param threads: Number of worker processes, defaults to config.threads
    """
    try:
        modes = tuple(CsiMode(m) for m in (modes if modes is not None else config.modes))
        policy = PowerPolicy(pc_policy if pc_policy is not None else config.power_control)
    except ValueError as e:
        raise ConfigException(f"[-] {e}")
    threads = threads if threads is not None else config.threads
    config = config.replace(modes=tuple(m.value for m in modes), power_control=policy.value).validate()

    cfsimlog.info(f"[!] Running {config.num_drops} drops (M={config.num_aps}, K={config.num_users}, "
                  f"modes: {', '.join(m.value for m in modes)}, power control: {policy.value}, workers: {threads})")
    evaluate = partial(evaluate_drop, config, modes, policy)
    if threads > 1:
        try:
            with ProcessPoolExecutor(max_workers=threads) as executor:
                drops = list(executor.map(evaluate, range(config.num_drops)))
        except BrokenProcessPool as e:
            raise CFSimException(f"[-] A worker process terminated abruptly: {e}")
    else:
        drops = [evaluate(i) for i in range(config.num_drops)]

    metadata = {"config_hash": config_hash(config.canonical_text()), "seed": config.rng_seed,
                "version": f"cfsim {cfsim.__version__}"}
    return ExperimentResult(config, modes, policy, drops, metadata)


def gaussianity_diagnostic(config: SystemConfig, drop: Drop, eta: np.ndarray, n_samples: int,
                           drop_index: int = 0, keep_samples: bool = False) -> GaussianityReport:
    """
    Compares the effective gains of one drop with their Gaussian approximations.
    :param n_samples: Number of small-scale realizations, at least 10^4
    :param keep_samples: If set, the S x K x K gains are attached to the report (for histograms)
    """
    if n_samples < 10000:
        raise ValueError(f"[-] The Gaussianity diagnostic needs at least 10000 samples (got {n_samples}).")
    est = estimation.estimation_stats(drop.beta, config.ul_pilot_len, config.rho_up)
    moments = estimation.gain_moments(drop.beta, est.gamma, eta, config.dl_pilot_len, config.rho_dp)
    gains = np.concatenate([a for _, a in draw_effective_gains(config, drop_index, drop, est, eta, n_samples)])

    num_users = drop.num_users
    approx_var = np.sum(eta * est.gamma ** 2, axis=0)
    direct = np.diagonal(gains, axis1=-2, axis2=-1)
    ks_direct = np.array([sps.kstest(direct[:, k].real, "norm",
                                     args=(moments.mean_akk[k], np.sqrt(approx_var[k]))).statistic
                          for k in range(num_users)])
    ks_cross = np.full((num_users, num_users), np.nan)
    for k in range(num_users):
        for j in range(num_users):
            if j != k:
                ks_cross[k, j] = sps.kstest(gains[:, k, j].real, "norm",
                                            args=(0.0, np.sqrt(moments.varsigma[k, j] / 2.0))).statistic
    im_re_ratio = np.mean(np.abs(direct.imag), axis=0) / np.mean(np.abs(direct.real), axis=0)

    report = GaussianityReport(ks_direct, ks_cross, im_re_ratio, moments.mean_akk, approx_var, moments.varsigma,
                               gains if keep_samples else None)
    if not report.passes(config.ks_threshold):
        cfsimlog.warning(f"[!] Largest KS distance {max(ks_direct.max(), np.nanmax(ks_cross, initial=0.0)):.4f} "
                         f"exceeds {config.ks_threshold}")
    return report
