import numpy as np
import pytest

from cfsim.framework.util import RngRole, substream, sample_blocks, complex_normal, db_to_linear, linear_to_db, \
    config_hash, crc32, SAMPLE_BLOCK_SIZE


def test_substream_is_keyed():
    first = substream(1, 3, RngRole.SMALL_SCALE, 2).standard_normal(5)
    again = substream(1, 3, RngRole.SMALL_SCALE, 2).standard_normal(5)
    np.testing.assert_array_equal(first, again)
    for other in (substream(2, 3, RngRole.SMALL_SCALE, 2), substream(1, 4, RngRole.SMALL_SCALE, 2),
                  substream(1, 3, RngRole.GEOMETRY, 2), substream(1, 3, RngRole.SMALL_SCALE, 3)):
        assert not np.array_equal(first, other.standard_normal(5))


def test_substream_accepts_large_seeds():
    substream(2 ** 64 - 1, 0, RngRole.GEOMETRY).uniform()


@pytest.mark.parametrize("n, blocks", [
    (0, []),
    (1, [(0, 1)]),
    (SAMPLE_BLOCK_SIZE, [(0, SAMPLE_BLOCK_SIZE)]),
    (600, [(0, 250), (1, 250), (2, 100)]),
])
def test_sample_blocks(n, blocks):
    assert sample_blocks(n) == blocks


def test_complex_normal():
    z = complex_normal(np.random.default_rng(0), (200000,))
    assert np.var(z.real) == pytest.approx(0.5, rel=0.02)
    assert np.var(z.imag) == pytest.approx(0.5, rel=0.02)


def test_db_conversion():
    assert db_to_linear(30) == pytest.approx(1000)
    assert linear_to_db(100) == pytest.approx(20)
    np.testing.assert_allclose(linear_to_db(db_to_linear([-140.7, 0.0, 9.0])), [-140.7, 0.0, 9.0])


def test_config_hash():
    assert crc32(b"123456789") == 0xCBF43926
    assert config_hash("123456789") == "cbf43926"
    assert config_hash("a") != config_hash("b")
