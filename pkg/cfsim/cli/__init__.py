import argparse
import logging
import os
import sys
from dataclasses import dataclass, asdict, field

from pathvalidate import sanitize_filepath, sanitize_filename

import cfsim
from cfsim import exception
from cfsim.cli import renderer
from cfsim.framework.montecarlo import run_experiment, empirical_cdf, prepare_drop, gaussianity_diagnostic
from cfsim.framework.power_control import PowerPolicy
from cfsim.framework.rates import CsiMode
from cfsim.framework.scenario import SystemConfig

rootlog = logging.getLogger()
console = logging.StreamHandler()
console.setLevel(logging.INFO)
formatter = logging.Formatter("%(levelname)-4s %(name)-3s: %(message)s")
console.setFormatter(formatter)

rootlog.setLevel(1)
rootlog.addHandler(console)


@dataclass
class RunManifest:
    """
    Describes how the files of an output directory were produced.
    """
    command: str
    config_path: str
    section: str
    output_dir: str
    flags: dict
    seed: int
    version: str = f"cfsim {cfsim.__version__}"
    config: dict = field(default_factory=dict)


class CommandLine:

    def __init__(self):
        pass

    def run(self, argv: list[str] = None) -> int:
        parser = argparse.ArgumentParser(prog="cfsim",
                                         description="Downlink beamforming training in cell-free massive MIMO.")
        subparsers = parser.add_subparsers(dest="command", help="Commands to run", required=True)

        # run
        run = subparsers.add_parser("run",
                                    help="Runs the Monte Carlo experiment and writes samples.csv, summary.json and manifest.json.")
        self.add_default_config_args(run)
        run.add_argument("--modes", help="Comma separated CSI modes: statistical, beamforming_training, perfect.",
                         type=str)
        run.add_argument("--drops", help="Number of random drops (overrides num_drops).", type=int)
        run.add_argument("--samples", help="Small-scale realizations per drop (overrides num_channel_samples).",
                         type=int)
        run.add_argument("--threads", help="Number of worker processes. Does not change the results.", type=int)
        run.set_defaults(func=self.cmd_run)

        # cdf
        cdf = subparsers.add_parser("cdf", help="Writes (throughput, cdf) points per mode from a samples.csv.")
        cdf.add_argument("samples", help="Path to a samples.csv written by 'run'.")
        cdf.add_argument("--mode", help="Only write the CDF of this mode.", type=str)
        cdf.add_argument("--out", help="Output directory.", type=str, required=True)
        cdf.add_argument("--verbose", help="Outputs a lot more debug information", default=False,
                         action="store_true")
        cdf.set_defaults(func=self.cmd_cdf)

        # gaussianity
        gaussianity = subparsers.add_parser("gaussianity",
                                            help="Compares the effective gains of one drop with their Gaussian approximations.")
        self.add_default_config_args(gaussianity)
        gaussianity.add_argument("--samples", help="Number of realizations (overrides gaussianity_samples).",
                                 type=int)
        gaussianity.add_argument("--drop", help="Index of the drop to analyse.", type=int, default=0)
        gaussianity.add_argument("--user", help="User k whose gain a_kk is histogrammed.", type=int, default=0)
        gaussianity.add_argument("--other", help="User k' for the cross gain a_kk'.", type=int, default=1)
        gaussianity.add_argument("--bins", help="Number of histogram bins.", type=int, default=100)
        gaussianity.set_defaults(func=self.cmd_gaussianity)

        args = parser.parse_args(argv)
        try:
            return args.func(args)
        except (exception.CFSimException, ValueError, OSError) as e:
            rootlog.error(str(e) if str(e).startswith("[-]") else f"[-] {e}")
            return 1

    def add_default_config_args(self, parser: argparse.ArgumentParser) -> None:
        """
        Adds arguments shared by all commands that read a scenario config file.
        :param parser: Parser that will have common arguments added
        :return:
        """
        parser.add_argument("config", help="Path to the scenario config file (.cfg).")
        parser.add_argument("--section", help="Scenario section within the config file.", type=str)
        parser.add_argument("--power-control", dest="power_control",
                            help="Power control policy (overrides power_control).",
                            choices=[p.value for p in PowerPolicy])
        parser.add_argument("--seed", help="RNG seed (overrides rng_seed).", type=int)
        parser.add_argument("--out", help="Output directory, created if missing.", type=str, required=True)
        parser.add_argument("--verbose", help="Outputs a lot more debug information", default=False,
                            action="store_true")

    def _load_config(self, args: argparse.Namespace) -> SystemConfig:
        """
        Reads the scenario and applies every flag that has a config-file equivalent.
        :param args:
        :return: Validated config
        """
        config = SystemConfig.from_file(args.config, args.section)
        return config.replace(
            rng_seed=args.seed,
            power_control=args.power_control,
            modes=getattr(args, "modes", None),
            num_drops=getattr(args, "drops", None),
            num_channel_samples=getattr(args, "samples", None) if args.command == "run" else None,
            gaussianity_samples=getattr(args, "samples", None) if args.command == "gaussianity" else None,
            threads=getattr(args, "threads", None),
        ).validate()

    def _prepare_output(self, path: str) -> str:
        """
        Sanitizes and creates the output directory.
        :param path:
        :return: The directory that will be written to
        """
        sanitized = sanitize_filepath(path, platform="auto")
        if sanitized != path:
            rootlog.info(f"[!] Sanitizing output path {path} to {sanitized}")
        os.makedirs(sanitized, exist_ok=True)
        return sanitized

    @classmethod
    def verbose(cls, args: argparse.Namespace) -> None:
        """
        Checks if --verbose is set True, if not, will disable logging below ERROR.
        :param args:
        :return:
        """
        if hasattr(args, "verbose") and args.verbose is False:
            logging.disable(logging.WARNING)
        else:
            logging.disable(logging.NOTSET)

    def _manifest(self, args: argparse.Namespace, output_dir: str, config: SystemConfig) -> RunManifest:
        flags = {k: v for k, v in vars(args).items() if k != "func"}
        return RunManifest(command=args.command, config_path=os.path.abspath(args.config), section=args.section,
                           output_dir=os.path.abspath(output_dir), flags=flags, seed=config.rng_seed,
                           config=config.as_dict())

    def cmd_run(self, args: argparse.Namespace) -> int:
        """
        Runs the experiment and writes samples.csv, summary.json and manifest.json.
        :param args:
        :return: Exit code
        """
        CommandLine.verbose(args)

        config = self._load_config(args)
        output_dir = self._prepare_output(args.out)

        result = run_experiment(config)

        renderer.write_samples_csv(result, os.path.join(output_dir, "samples.csv"))
        summary = result.summary()
        summary["config"] = result.config.as_dict()
        violations = result.mode_ordering_violations()
        summary["mode_ordering_violations"] = len(violations)
        if violations:
            rootlog.warning(f"[!] {len(violations)} (drop, user) pairs violate the mode ordering, first: {violations[0]}")
        summary_path = os.path.join(output_dir, "summary.json")
        renderer.write_json(summary, summary_path)
        renderer.write_json(asdict(self._manifest(args, output_dir, result.config)),
                            os.path.join(output_dir, "manifest.json"))

        # Print what was written, not what is in memory
        renderer.render_summary(renderer.read_json(summary_path), sys.stdout)
        return 0

    def cmd_cdf(self, args: argparse.Namespace) -> int:
        """
        Writes one cdf_<mode>.csv per mode found in (or selected from) a samples file.
        :param args:
        :return: Exit code
        """
        CommandLine.verbose(args)

        known_modes = [m.value for m in CsiMode]
        if args.mode is not None and args.mode not in known_modes:
            raise exception.ConfigException(f"[-] Unknown mode '{args.mode}'. Known modes: {', '.join(known_modes)}")
        if not os.path.isfile(args.samples):
            raise exception.ConfigException(f"[-] Samples file {args.samples} does not exist.")

        samples = renderer.read_samples_csv(args.samples)
        if args.mode is not None:
            samples = {args.mode: samples[args.mode]} if args.mode in samples else {}
        if len(samples) == 0:
            raise exception.ConfigException(f"[-] No samples found in {args.samples}"
                                            + (f" for mode '{args.mode}'." if args.mode else "."))

        output_dir = self._prepare_output(args.out)
        for mode, values in samples.items():
            renderer.write_cdf_points(empirical_cdf(values),
                                      os.path.join(output_dir, sanitize_filename(f"cdf_{mode}.csv")))
        return 0

    def cmd_gaussianity(self, args: argparse.Namespace) -> int:
        """
        Writes histograms of Re(a_kk) and Re(a_kk') with their Gaussian reference densities, and the KS statistics.
        :param args:
        :return: Exit code
        """
        CommandLine.verbose(args)

        config = self._load_config(args)
        users = config.num_users
        if not 0 <= args.user < users:
            raise exception.ConfigException(f"[-] --user must lie in [0, {users}).")
        other = args.other if users > 1 else None
        if other is not None and (not 0 <= other < users or other == args.user):
            raise exception.ConfigException(f"[-] --other must lie in [0, {users}) and differ from --user.")
        output_dir = self._prepare_output(args.out)

        drop, _, power = prepare_drop(config, args.drop, PowerPolicy(config.power_control))
        report = gaussianity_diagnostic(config, drop, power.eta, config.gaussianity_samples, drop_index=args.drop,
                                        keep_samples=True)

        stats = renderer.gaussianity_stats(report, args.user, other, config.ks_threshold)
        renderer.write_histogram(report.gains[:, args.user, args.user].real, stats["direct_reference"]["mean"],
                                 stats["direct_reference"]["std"], args.bins,
                                 os.path.join(output_dir, "hist_akk.csv"))
        if other is not None:
            renderer.write_histogram(report.gains[:, args.user, other].real, 0.0, stats["cross_reference"]["std"],
                                     args.bins, os.path.join(output_dir, "hist_akk_cross.csv"))
        stats_path = os.path.join(output_dir, "gaussianity.json")
        renderer.write_json(stats, stats_path)
        renderer.write_json(asdict(self._manifest(args, output_dir, config)), os.path.join(output_dir, "manifest.json"))

        renderer.render_gaussianity(renderer.read_json(stats_path), sys.stdout)
        return 0
