from __future__ import annotations

import configparser
import dataclasses
import json
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from cfsim.exception import ConfigException
from cfsim.framework import channel
from cfsim.framework.power_control import PowerPolicy
from cfsim.framework.rates import CsiMode

cfsimlog = logging.getLogger(__name__)

# Boltzmann constant in J/K
BOLTZMANN = 1.380649e-23
# Reference noise temperature in K
NOISE_TEMPERATURE = 290.0

# Offsets of the nominal square and its eight neighbours, in units of area_side
_WRAP_OFFSETS = np.array([(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1)], dtype=float)


@dataclass
class SystemConfig:
    """
    All constants of one simulation scenario. Field names double as the keys of the INI config files.
    Pilot lengths of None resolve to num_users, a downlink pilot power of None resolves to ap_power.
    """
    num_aps: int = 50
    num_users: int = 10
    area_side: float = 1000.0
    carrier_freq: float = 1.9e9
    bandwidth: float = 20e6
    noise_figure: float = 9.0
    shadow_sigma: float = 8.0
    ap_height: float = 15.0
    user_height: float = 1.65
    d0: float = 10.0
    d1: float = 50.0
    coherence_len: int = 200
    ul_pilot_len: int | None = None
    dl_pilot_len: int | None = None
    ap_power: float = 0.2
    user_power: float = 0.1
    dl_pilot_power: float | None = None
    num_drops: int = 200
    num_channel_samples: int = 1000
    rng_seed: int = 1
    modes: tuple[str, ...] = field(default_factory=lambda: tuple(m.value for m in CsiMode))
    power_control: str = PowerPolicy.MAXMIN.value
    pc_tol: float = 1e-3
    pc_max_iter: int = 100
    ks_threshold: float = 0.03
    gaussianity_samples: int = 100000
    threads: int = 1

    def __post_init__(self):
        if self.ul_pilot_len is None:
            self.ul_pilot_len = self.num_users
        if self.dl_pilot_len is None:
            self.dl_pilot_len = self.num_users
        if self.dl_pilot_power is None:
            self.dl_pilot_power = self.ap_power
        if isinstance(self.modes, str):
            self.modes = tuple(m.strip() for m in self.modes.split(",") if m.strip())
        else:
            self.modes = tuple(self.modes)

    def validate(self) -> SystemConfig:
        """
        Checks every invariant of the scenario.
        :return: self, so calls can be chained
        """
        if self.num_users < 1:
            raise ConfigException(f"[-] num_users must be at least 1 (got {self.num_users}).")
        if self.num_aps <= self.num_users:
            raise ConfigException(f"[-] num_aps ({self.num_aps}) must exceed num_users ({self.num_users}).")
        if self.ul_pilot_len < self.num_users:
            raise ConfigException(f"[-] ul_pilot_len ({self.ul_pilot_len}) must be >= num_users ({self.num_users}).")
        if self.dl_pilot_len < self.num_users:
            raise ConfigException(f"[-] dl_pilot_len ({self.dl_pilot_len}) must be >= num_users ({self.num_users}).")
        if self.ul_pilot_len + self.dl_pilot_len >= self.coherence_len:
            raise ConfigException(
                f"[-] ul_pilot_len + dl_pilot_len ({self.ul_pilot_len + self.dl_pilot_len}) must be below coherence_len ({self.coherence_len}).")
        for key in ("area_side", "carrier_freq", "bandwidth", "ap_height", "user_height", "ap_power", "user_power",
                    "dl_pilot_power", "d0", "d1", "pc_tol", "ks_threshold"):
            value = getattr(self, key)
            if not math.isfinite(value) or value <= 0:
                raise ConfigException(f"[-] {key} must be strictly positive (got {value}).")
        if self.d0 >= self.d1:
            raise ConfigException(f"[-] d0 ({self.d0}) must be below d1 ({self.d1}).")
        if not math.isfinite(self.noise_figure) or self.shadow_sigma < 0:
            raise ConfigException(f"[-] noise_figure must be finite and shadow_sigma nonnegative.")
        for key in ("num_drops", "num_channel_samples", "pc_max_iter", "gaussianity_samples", "threads"):
            if getattr(self, key) < 1:
                raise ConfigException(f"[-] {key} must be at least 1 (got {getattr(self, key)}).")
        known_modes = {m.value for m in CsiMode}
        for mode in self.modes:
            if mode not in known_modes:
                raise ConfigException(f"[-] Unknown mode '{mode}'. Known modes: {', '.join(sorted(known_modes))}")
        if len(self.modes) == 0:
            raise ConfigException(f"[-] At least one mode has to be evaluated.")
        if self.power_control not in {p.value for p in PowerPolicy}:
            raise ConfigException(f"[-] Unknown power control policy '{self.power_control}'.")
        return self

    @property
    def noise(self) -> float:
        return noise_power(self)

    @property
    def rho_d(self) -> float:
        return normalized_snr(self.ap_power, self.noise)

    @property
    def rho_dp(self) -> float:
        return normalized_snr(self.dl_pilot_power, self.noise)

    @property
    def rho_up(self) -> float:
        return normalized_snr(self.user_power, self.noise)

    def path_loss_params(self) -> channel.PathLossParams:
        return channel.PathLossParams(d0=self.d0, d1=self.d1,
                                      fixed_loss_L=channel.hata_fixed_loss(self.carrier_freq, self.ap_height,
                                                                           self.user_height))

    def as_dict(self) -> dict:
        values = dataclasses.asdict(self)
        values["modes"] = list(self.modes)
        return values

    def canonical_text(self) -> str:
        """
        Stable text form of the config, used for hashing. Run knobs that cannot change the results
        (worker count) are left out.
        """
        values = self.as_dict()
        values.pop("threads")
        return json.dumps(values, sort_keys=True)

    def replace(self, **changes) -> SystemConfig:
        """Returns a copy with the given fields replaced, ignoring changes that are None."""
        changes = {k: v for k, v in changes.items() if v is not None}
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_file(cls, path: str, section: str = None) -> SystemConfig:
        """
        Reads a scenario from an INI config file.
        :param path: Path to the .cfg file
        :param section: Scenario section; if omitted the file must contain exactly one section (or only DEFAULT)
        :return: Validated SystemConfig
        """
        if not os.path.isfile(path):
            raise ConfigException(f"[-] Config file {path} does not exist.")
        parser = configparser.ConfigParser()
        try:
            parser.read(path)
        except configparser.Error as e:
            raise ConfigException(f"[-] Cannot parse config file {path}: {e}")

        if section is None:
            sections = parser.sections()
            if len(sections) > 1:
                raise ConfigException(
                    f"[-] Config file {path} has several scenarios, choose one with --section: {', '.join(sections)}")
            items = parser[sections[0]] if sections else parser.defaults()
        elif parser.has_section(section):
            items = parser[section]
        else:
            raise ConfigException(f"[-] Scenario '{section}' not found in {path}.")

        cfsimlog.info(f"[!] Loading scenario '{section or 'default'}' from {path}")
        return cls.from_mapping(dict(items)).validate()

    @classmethod
    def from_mapping(cls, values: dict[str, str]) -> SystemConfig:
        """
        Builds a config from string values (as read from a config file), converting each value to the field's type.
        """
        fields = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in fields:
                raise ConfigException(f"[-] Unknown config key '{key}'.")
            kwargs[key] = _convert(key, fields[key].default, raw)
        return cls(**kwargs)


def _convert(key: str, default, raw):
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    try:
        if key == "modes" or key == "power_control":
            return raw
        if key in ("ul_pilot_len", "dl_pilot_len"):
            return None if raw.lower() in ("", "none") else int(raw)
        if key == "dl_pilot_power":
            return None if raw.lower() in ("", "none") else float(raw)
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(float(raw)) if "e" in raw.lower() else int(raw)
        return float(raw)
    except ValueError:
        raise ConfigException(f"[-] Invalid value for '{key}': {raw}")


@dataclass
class Drop:
    """
    One random placement of APs and users. Positions are in meters, beta holds the linear large-scale gains (M x K).
    """
    ap_positions: np.ndarray
    user_positions: np.ndarray
    beta: np.ndarray

    @property
    def num_aps(self) -> int:
        return self.ap_positions.shape[0]

    @property
    def num_users(self) -> int:
        return self.user_positions.shape[0]


def noise_power(config: SystemConfig) -> float:
    """
    Thermal noise power in W: bandwidth x k_B x T_0 x noise figure.
    """
    return config.bandwidth * BOLTZMANN * NOISE_TEMPERATURE * 10 ** (config.noise_figure / 10)


def normalized_snr(radiated_power: float, noise: float) -> float:
    """
    Normalized transmit SNR, i.e., radiated power divided by the noise power (both in W, linear scale).
    """
    if noise <= 0:
        raise ValueError(f"[-] Noise power must be positive (got {noise}).")
    if radiated_power < 0:
        raise ValueError(f"[-] Radiated power must be nonnegative (got {radiated_power}).")
    return radiated_power / noise


def wrapped_distance(p, q, area_side: float) -> float:
    """
    Horizontal distance between p and q on the wrapped-around square, i.e., the shortest distance from p
    to any of the nine translated images of q.
    """
    p = np.asarray(p, dtype=float)
    images = np.asarray(q, dtype=float) + _WRAP_OFFSETS * area_side
    return float(np.min(np.linalg.norm(images - p, axis=1)))


def wrapped_distances(ap_positions: np.ndarray, user_positions: np.ndarray, area_side: float) -> np.ndarray:
    """
    Same as wrapped_distance for every (AP, user) pair.
    :return: M x K matrix of distances
    """
    diff = user_positions[np.newaxis, :, np.newaxis, :] + _WRAP_OFFSETS[np.newaxis, np.newaxis, :, :] * area_side \
           - ap_positions[:, np.newaxis, np.newaxis, :]
    return np.min(np.linalg.norm(diff, axis=-1), axis=-1)


def generate_drop(config: SystemConfig, rng: np.random.Generator,
                  shadow_rng: np.random.Generator = None) -> Drop:
    """
    Places APs and users uniformly at random on the square and computes their large-scale gains.
    :param rng: Stream for the positions
    :param shadow_rng: Stream for the shadowing; falls back to rng
    """
    ap_positions = rng.uniform(0.0, config.area_side, size=(config.num_aps, 2))
    user_positions = rng.uniform(0.0, config.area_side, size=(config.num_users, 2))
    beta = channel.large_scale(config, ap_positions, user_positions, shadow_rng if shadow_rng is not None else rng)
    return Drop(ap_positions, user_positions, beta)
