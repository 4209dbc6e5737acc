from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from cfsim.framework import scenario
from cfsim.framework.util import complex_normal

cfsimlog = logging.getLogger(__name__)

# Validity range of the Hata-COST231 model in MHz
HATA_MIN_FREQ_MHZ = 150.0
HATA_MAX_FREQ_MHZ = 2000.0


@dataclass(frozen=True)
class PathLossParams:
    """
    Constants of the three-slope path loss model. Below d0 the loss is flat, between d0 and d1 it grows with
    20 dB/decade and above d1 with 35 dB/decade. fixed_loss_L is the Hata-COST231 constant in dB.
    """
    d0: float = 10.0
    d1: float = 50.0
    fixed_loss_L: float = 140.7151

    def __post_init__(self):
        if not 0 < self.d0 < self.d1:
            raise ValueError(f"[-] Breakpoints must satisfy 0 < d0 < d1 (got d0={self.d0}, d1={self.d1}).")


@dataclass
class SmallScale:
    """
    Small-scale fading h, i.i.d. CN(0,1). Shape is M x K, or S x M x K for a batch of S realizations.
    """
    h: np.ndarray


def hata_fixed_loss(carrier_freq: float, ap_height: float, user_height: float) -> float:
    """
    Hata-COST231 constant of the three-slope model.
    :param carrier_freq: Carrier frequency in Hz
    :param ap_height: AP antenna height in m
    :param user_height: User antenna height in m
    :return: L in dB
    """
    if ap_height <= 0:
        raise ValueError(f"[-] AP height must be positive (got {ap_height}).")
    if user_height < 0:
        raise ValueError(f"[-] User height must be nonnegative (got {user_height}).")
    f_mhz = carrier_freq / 1e6
    if not HATA_MIN_FREQ_MHZ <= f_mhz <= HATA_MAX_FREQ_MHZ:
        cfsimlog.warning(f"[!] Carrier frequency {f_mhz} MHz is outside the Hata-COST231 range "
                         f"({HATA_MIN_FREQ_MHZ}-{HATA_MAX_FREQ_MHZ} MHz).")
    log_f = math.log10(f_mhz)
    return (46.3 + 33.9 * log_f - 13.82 * math.log10(ap_height)
            - (1.1 * log_f - 0.7) * user_height + (1.56 * log_f - 0.8))


def path_loss_db(d, params: PathLossParams):
    """
    Three-slope path loss (a negative gain in dB) at horizontal distance d in meters.
    Works on scalars and arrays.
    """
    d = np.asarray(d, dtype=float)
    # log10 of the flat region's distance for d <= d0, of d itself otherwise
    d_km = np.maximum(d, params.d0) / 1000.0
    d1_km = params.d1 / 1000.0
    outer = -params.fixed_loss_L - 35.0 * np.log10(d_km)
    inner = -params.fixed_loss_L - 15.0 * np.log10(d1_km) - 20.0 * np.log10(d_km)
    pl = np.where(d > params.d1, outer, inner)
    return float(pl) if pl.ndim == 0 else pl


def large_scale(config: scenario.SystemConfig, ap_positions: np.ndarray, user_positions: np.ndarray,
                rng: np.random.Generator) -> np.ndarray:
    """
    Large-scale fading: path loss over wrapped distances plus log-normal shadowing.
    Shadowing is only applied to links longer than d1.
    :return: M x K matrix of linear gains
    """
    params = config.path_loss_params()
    distances = scenario.wrapped_distances(ap_positions, user_positions, config.area_side)
    pl = path_loss_db(distances, params)
    # Drawn for every link so the stream does not depend on the geometry
    z = rng.standard_normal(distances.shape)
    shadowing = np.where(distances > params.d1, config.shadow_sigma * z, 0.0)
    return np.power(10.0, (pl + shadowing) / 10.0)


def draw_small_scale(rng: np.random.Generator, num_aps: int, num_users: int, n_samples: int = None) -> SmallScale:
    """
    Rayleigh fading coefficients. The true channel is g = sqrt(beta) * h.
    :param n_samples: If given, draws a batch with a leading sample dimension
    """
    if num_aps < 1 or num_users < 1:
        raise ValueError(f"[-] Need at least one AP and one user (got M={num_aps}, K={num_users}).")
    shape = (num_aps, num_users) if n_samples is None else (n_samples, num_aps, num_users)
    return SmallScale(complex_normal(rng, shape))
