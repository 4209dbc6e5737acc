import csv
import json
import sys
from typing import Dict, List

import numpy as np
from scipy import stats as sps

from cfsim.framework.montecarlo import ExperimentResult, CdfSummary, GaussianityReport
from cfsim.logging import cfsimlog

SAMPLES_HEADER = ["drop", "user", "mode", "gross_se_bit_per_cu", "net_throughput_bit_per_s"]


def readable_rate(num: float, suffix="bit/s") -> str:
    """
    Converts a rate in bit/s to a readable format depending on its size.
    Example: 9000000 -> 9.00 Mbit/s
    :param num:
    :param suffix:
    :return:
    """
    if num < 0 or not np.isfinite(num):
        return "-"
    for unit in ["", "k", "M", "G"]:
        if abs(num) < 1000.0:
            return f"{num:.2f} {unit}{suffix}"
        num /= 1000.0
    return f"{num:.2f} T{suffix}"


def _number(value: float) -> str:
    # Shortest representation that round-trips, no thousands separators
    return repr(float(value))


def write_samples_csv(result: ExperimentResult, path: str) -> int:
    """
    Writes one row per drop x user x mode.
    :return: Number of rows written
    """
    rows = 0
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(SAMPLES_HEADER)
        for drop, user, mode, gross, net in result.records():
            writer.writerow([drop, user, mode.value, _number(gross), _number(net)])
            rows += 1
    cfsimlog.info(f"[+] Wrote {rows} samples to {path}")
    return rows


def read_samples_csv(path: str) -> Dict[str, List[float]]:
    """
    Reads the net throughput column of a samples file, grouped by mode (in order of appearance).
    """
    samples = {}
    with open(path, "r", newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or any(column not in reader.fieldnames for column in SAMPLES_HEADER):
            raise ValueError(f"[-] {path} is not a samples file (expected columns: {', '.join(SAMPLES_HEADER)}).")
        for row in reader:
            samples.setdefault(row["mode"], []).append(float(row["net_throughput_bit_per_s"]))
    return samples


def write_json(data: dict, path: str) -> None:
    with open(path, "w") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")
    cfsimlog.info(f"[+] Wrote {path}")


def read_json(path: str) -> dict:
    with open(path, "r") as f:
        return json.load(f)


def write_cdf_points(cdf: CdfSummary, path: str) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["net_throughput_bit_per_s", "cdf"])
        for value, probability in zip(cdf.values, cdf.cdf):
            writer.writerow([_number(value), _number(probability)])
    cfsimlog.info(f"[+] Wrote {len(cdf.values)} CDF points to {path}")


def write_histogram(samples: np.ndarray, mean: float, std: float, bins: int, path: str) -> np.ndarray:
    """
    Writes a histogram of real-valued samples next to the Gaussian reference density N(mean, std^2)
    evaluated at the bin centers.
    :return: The probability mass per bin
    """
    counts, edges = np.histogram(samples, bins=bins)
    mass = counts / samples.size
    widths = np.diff(edges)
    centers = (edges[:-1] + edges[1:]) / 2.0
    reference = sps.norm.pdf(centers, loc=mean, scale=std)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["bin_left", "bin_right", "bin_center", "probability_mass", "empirical_density",
                         "reference_density"])
        for i in range(len(counts)):
            writer.writerow([_number(edges[i]), _number(edges[i + 1]), _number(centers[i]), _number(mass[i]),
                             _number(mass[i] / widths[i]), _number(reference[i])])
    cfsimlog.info(f"[+] Wrote histogram with {bins} bins to {path}")
    return mass


def gaussianity_stats(report: GaussianityReport, user: int, other: int, threshold: float) -> dict:
    """
    Collects the diagnostic numbers that go into the stats file.
    """
    return {
        "user": user,
        "other_user": other,
        "ks_threshold": threshold,
        "passes": report.passes(threshold),
        "ks_direct": report.ks_direct.tolist(),
        "ks_cross": [[None if np.isnan(v) else float(v) for v in row] for row in report.ks_cross],
        "im_re_ratio": report.im_re_ratio.tolist(),
        "direct_reference": {"mean": float(report.mean_akk[user]), "std": float(np.sqrt(report.approx_var[user]))},
        "cross_reference": None if other is None else {"mean": 0.0,
                                                       "std": float(np.sqrt(report.varsigma[user, other] / 2.0))},
    }


def render_summary(summary: dict, outfd=sys.stdout) -> None:
    """
    Prints the percentile table of a summary.json
    :param summary: Contents of summary.json
    :param outfd: Where to output everything
    :return:
    """
    outfd.write(f"Mode{'':<24}95%-likely{'':<10}Median\n")
    for mode, values in summary["percentiles"].items():
        outfd.write(f"{mode:<28}{readable_rate(values['p05']):<20}{readable_rate(values['p50'])}\n")
    for name, gains in summary["gains"].items():
        outfd.write(f"Gain {name}: {gains['p05']:+.1%} (95%-likely), {gains['p50']:+.1%} (median)\n")


def render_gaussianity(stats: dict, outfd=sys.stdout) -> None:
    user = stats["user"]
    outfd.write(f"KS distance Re(a_kk), user {user}: {stats['ks_direct'][user]:.4f}\n")
    if stats["other_user"] is not None:
        outfd.write(f"KS distance Re(a_kk'), users ({user}, {stats['other_user']}): "
                    f"{stats['ks_cross'][user][stats['other_user']]:.4f}\n")
    outfd.write(f"mean|Im(a_kk)| / mean|Re(a_kk)|, user {user}: {stats['im_re_ratio'][user]:.4f}\n")
    outfd.write(f"All KS distances below {stats['ks_threshold']}: {stats['passes']}\n")
