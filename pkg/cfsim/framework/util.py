from enum import IntEnum

import crcmod.predefined
import numpy as np

from cfsim.logging import cfsimlog

# Number of channel samples that share one RNG substream
SAMPLE_BLOCK_SIZE = 250


class RngRole(IntEnum):
    """
    Purpose of a random stream. Each role of each drop gets its own substream so that adding
    or removing a consumer never shifts the draws of another one.
    """
    GEOMETRY = 0
    SHADOWING = 1
    SMALL_SCALE = 2
    UPLINK_PILOT_NOISE = 3
    DOWNLINK_PILOT_NOISE = 4


def substream(seed: int, drop: int, role: RngRole, block: int = 0) -> np.random.Generator:
    """
    Creates a counter-based generator keyed by (seed, drop, role, block).
    The same key always yields the same stream, independent of which process asks for it.
    :param seed: Experiment seed (64 bit)
    :param drop: Index of the drop
    :param role: What the stream is used for
    :param block: Index of a block of SAMPLE_BLOCK_SIZE channel samples
    :return: A numpy Generator backed by Philox
    """
    key = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(drop), int(role), int(block)])
    return np.random.Generator(np.random.Philox(key))


def sample_blocks(n_samples: int) -> list[tuple[int, int]]:
    """
    Splits n_samples into (block index, block length) pairs of SAMPLE_BLOCK_SIZE.
    """
    blocks = []
    for i, start in enumerate(range(0, n_samples, SAMPLE_BLOCK_SIZE)):
        blocks.append((i, min(SAMPLE_BLOCK_SIZE, n_samples - start)))
    return blocks


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """
    Draws circularly symmetric complex Gaussian samples with unit variance (0.5 per real component).
    """
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(0.5)


def db_to_linear(value_db):
    return np.power(10.0, np.asarray(value_db, dtype=float) / 10.0)


def linear_to_db(value):
    return 10.0 * np.log10(value)


def config_hash(text: str) -> str:
    """
    CRC-32 of a canonical configuration text, rendered as 8 hex digits.
    """
    checksum = crc32(text.encode("utf-8"))
    cfsimlog.debug(f"[!] Config hash {checksum:08x}")
    return f"{checksum:08x}"


crc32 = crcmod.predefined.mkPredefinedCrcFun('crc-32')
