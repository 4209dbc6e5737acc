import io

import numpy as np
import pytest

from cfsim.cli import renderer
from cfsim.framework.montecarlo import run_experiment, empirical_cdf


def test_readable_rate():
    assert renderer.readable_rate(9e6) == "9.00 Mbit/s"
    assert renderer.readable_rate(512) == "512.00 bit/s"
    assert renderer.readable_rate(2.5e12) == "2.50 Tbit/s"
    assert renderer.readable_rate(float("nan")) == "-"


def test_samples_csv(tmp_path, small_config):
    result = run_experiment(small_config, modes=["statistical", "perfect"])
    path = str(tmp_path / "samples.csv")
    assert renderer.write_samples_csv(result, path) == 3 * 3 * 2
    lines = (tmp_path / "samples.csv").read_text().splitlines()
    assert lines[0] == ",".join(renderer.SAMPLES_HEADER)
    assert lines[1].startswith("0,0,statistical,")

    samples = renderer.read_samples_csv(path)
    assert list(samples) == ["statistical", "perfect"]
    # Values survive the text round-trip exactly
    assert samples["perfect"] == list(result.samples(result.modes[1]))


def test_read_samples_csv_rejects_other_files(tmp_path):
    path = tmp_path / "other.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        renderer.read_samples_csv(str(path))


def test_cdf_points(tmp_path):
    path = tmp_path / "cdf.csv"
    renderer.write_cdf_points(empirical_cdf([3.0, 1.0, 2.0, 2.0]), str(path))
    assert path.read_text().splitlines() == ["net_throughput_bit_per_s,cdf", "1.0,0.25", "2.0,0.75", "3.0,1.0"]


def test_histogram(tmp_path):
    samples = np.random.default_rng(0).normal(2.0, 0.5, 50000)
    path = tmp_path / "hist.csv"
    mass = renderer.write_histogram(samples, 2.0, 0.5, 40, str(path))
    assert mass.sum() == pytest.approx(1.0)
    rows = [line.split(",") for line in path.read_text().splitlines()[1:]]
    assert len(rows) == 40
    # Empirical and reference densities agree where most of the mass is
    center = max(rows, key=lambda row: float(row[3]))
    assert float(center[4]) == pytest.approx(float(center[5]), rel=0.1)


def test_render_summary():
    summary = {"percentiles": {"statistical": {"p05": 1.2e6, "p50": 4e6},
                               "beamforming_training": {"p05": 1.5e6, "p50": 5e6}},
               "gains": {"beamforming_training_over_statistical": {"p05": 0.25, "p50": 0.25}}}
    out = io.StringIO()
    renderer.render_summary(summary, out)
    text = out.getvalue()
    assert "1.20 Mbit/s" in text and "5.00 Mbit/s" in text
    assert "+25.0%" in text


def test_render_gaussianity_single_user():
    stats = {"user": 0, "other_user": None, "ks_threshold": 0.03, "passes": True, "ks_direct": [0.01],
             "ks_cross": [[None]], "im_re_ratio": [0.02]}
    out = io.StringIO()
    renderer.render_gaussianity(stats, out)
    assert "a_kk'" not in out.getvalue()
    assert "0.0100" in out.getvalue()
