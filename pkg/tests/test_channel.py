import numpy as np
import pytest

from cfsim.framework.channel import PathLossParams, hata_fixed_loss, path_loss_db, large_scale, draw_small_scale
from cfsim.framework.scenario import SystemConfig, wrapped_distances


def test_hata_fixed_loss():
    assert hata_fixed_loss(1.9e9, 15, 1.65) == pytest.approx(140.72, abs=0.01)
    assert hata_fixed_loss(1.9e9, 15, 0) == pytest.approx(145.5, abs=0.1)


def test_hata_rejects_heights():
    with pytest.raises(ValueError):
        hata_fixed_loss(1.9e9, 0, 1.65)
    with pytest.raises(ValueError):
        hata_fixed_loss(1.9e9, 15, -1)


def test_hata_warns_outside_range(caplog):
    hata_fixed_loss(3.5e9, 15, 1.65)
    assert any("outside" in record.message for record in caplog.records)


def test_path_loss_db():
    params = PathLossParams(fixed_loss_L=140.72)
    assert path_loss_db(1000, params) == pytest.approx(-140.72)
    # Continuity at d1
    d1 = params.d1 / 1000
    outer = -params.fixed_loss_L - 35 * np.log10(d1)
    inner = -params.fixed_loss_L - 15 * np.log10(d1) - 20 * np.log10(d1)
    assert outer == pytest.approx(inner)
    assert path_loss_db(params.d1, params) == pytest.approx(outer)
    assert path_loss_db(params.d1 + 1e-9, params) == pytest.approx(outer)
    # Flat below d0
    assert path_loss_db(5, params) == path_loss_db(params.d0, params)
    assert path_loss_db(0, params) == path_loss_db(params.d0, params)
    # Monotone in distance
    d = np.linspace(1, 2000, 500)
    assert np.all(np.diff(path_loss_db(d, params)) <= 0)


def test_path_loss_params_validate():
    with pytest.raises(ValueError):
        PathLossParams(d0=50, d1=10)


def test_large_scale_without_shadowing():
    config = SystemConfig(num_aps=4, num_users=2, shadow_sigma=0)
    rng = np.random.default_rng(0)
    aps = rng.uniform(0, 1000, size=(4, 2))
    users = rng.uniform(0, 1000, size=(2, 2))
    beta = large_scale(config, aps, users, np.random.default_rng(1))

    expected = 10 ** (path_loss_db(wrapped_distances(aps, users, 1000), config.path_loss_params()) / 10)
    np.testing.assert_allclose(beta, expected)


def test_large_scale_shadowing_is_zero_mean_in_db():
    config = SystemConfig(num_aps=2, num_users=1)
    aps = np.array([[0.0, 0.0]])
    users = np.tile([[300.0, 0.0]], (100000, 1))
    beta = large_scale(config, aps, users, np.random.default_rng(7))
    log_beta = np.log10(beta[0])
    assert np.mean(log_beta) == pytest.approx(path_loss_db(300, config.path_loss_params()) / 10, abs=1e-2)
    assert np.std(10 * log_beta) == pytest.approx(config.shadow_sigma, rel=0.02)


def test_large_scale_no_shadowing_near_ap():
    config = SystemConfig(num_aps=2, num_users=1)
    aps = np.array([[0.0, 0.0], [500.0, 500.0]])
    users = np.array([[30.0, 0.0]])
    beta = large_scale(config, aps, users, np.random.default_rng(2))
    assert beta[0, 0] == pytest.approx(10 ** (path_loss_db(30, config.path_loss_params()) / 10))


def test_small_scale_moments():
    h = draw_small_scale(np.random.default_rng(4), 1000, 1000).h
    power = np.abs(h) ** 2
    assert h.shape == (1000, 1000)
    assert np.var(h) == pytest.approx(1.0, rel=0.005)
    # 3 sigma band of the sample mean of 1e6 CN(0,1) draws
    assert abs(np.mean(h.real)) < 3 * np.sqrt(0.5 / h.size)
    assert abs(np.mean(h.imag)) < 3 * np.sqrt(0.5 / h.size)
    assert np.mean(power <= 1) == pytest.approx(1 - np.exp(-1), rel=0.005)


def test_small_scale_batch():
    h = draw_small_scale(np.random.default_rng(4), 5, 3, n_samples=7).h
    assert h.shape == (7, 5, 3)
    with pytest.raises(ValueError):
        draw_small_scale(np.random.default_rng(4), 0, 3)


def test_large_scale_depends_only_on_wrapped_distances():
    config = SystemConfig(num_aps=6, num_users=3)
    rng = np.random.default_rng(4)
    aps = rng.uniform(0, 1000, size=(6, 2))
    users = rng.uniform(0, 1000, size=(3, 2))

    # The same geometry in km gives the same distances once converted back to m
    np.testing.assert_allclose(1000 * wrapped_distances(aps / 1000, users / 1000, 1.0),
                               wrapped_distances(aps, users, 1000), rtol=1e-12)

    # Shifting the whole layout on the torus moves no wrapped distance, so beta stays
    shift = np.array([370.0, 815.0])
    beta = large_scale(config, aps, users, np.random.default_rng(9))
    shifted = large_scale(config, (aps + shift) % 1000, (users + shift) % 1000, np.random.default_rng(9))
    np.testing.assert_allclose(shifted, beta, rtol=1e-9)
