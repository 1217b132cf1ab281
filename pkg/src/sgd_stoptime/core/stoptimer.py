# Copyright 2025 The sgd_stoptime Authors


import sys
import argparse
import os

from sgd_stoptime.constants import DEFAULT_OUTPUT_DIR, OUTPUT_DIR_ENV
from sgd_stoptime.core.config import ConfigError, ExperimentConfig
from sgd_stoptime.ensemble.runner import run_ensemble
from sgd_stoptime.export.exporter import export_ensemble
from sgd_stoptime.model.schedule import schedule_from_dict
from sgd_stoptime.types import Verdict
import sgd_stoptime.logger as sglog
from sgd_stoptime import __version__


EXIT_OK = 0
EXIT_USAGE = 2


class StoptimerArgsFormatter(argparse.RawTextHelpFormatter, argparse.ArgumentDefaultsHelpFormatter):
    """
    Combine argsparse formatting for preserved line breaks and including default values
    """
    pass


class Stoptimer:

    defaults = {
        "loglevel": sglog.INFO,

        # output directory when neither --out nor the config sets one
        "output_env": OUTPUT_DIR_ENV,
        "output": DEFAULT_OUTPUT_DIR,

        # worker pool size
        "threads": 1,

        # classify defaults
        "scale": 1.0,
        "p": 3.0,
    }

    def __init__(self, in_args=None) -> None:
        self.args = self.parse_inputs(in_args)

        if self.args.version:
            print(__version__)
            sys.exit(EXIT_OK)

        sglog.setloglevel(self.args.loglevel)

        if self.args.command is None:
            self.parser.print_usage(sys.stderr)
            sys.exit(EXIT_USAGE)

    def run(self) -> int:
        if self.args.command == "classify":
            return self.classify()
        return self.run_experiment()

    def _output_dir(self, config: ExperimentConfig) -> str:
        if self.args.out is not None:
            return self.args.out
        if config.output_dir is not None:
            return config.output_dir
        return os.environ.get(self.defaults["output_env"], self.defaults["output"])

    def run_experiment(self) -> int:
        try:
            config = ExperimentConfig.from_json(self.args.config)
        except ConfigError as err:
            sglog.log(sglog.ERROR, "Invalid config:", err)
            return EXIT_USAGE

        classification = config.build_setup().schedule.classify()
        sglog.log(sglog.INFO, "Schedule", config.schedule_spec, "->", classification)
        if classification.relaxed != Verdict.YES:
            if config.require_relaxed:
                sglog.log(sglog.ERROR, f"require_relaxed is set but the schedule gives {classification}:",
                          "; ".join(classification.tests))
                return EXIT_USAGE
            sglog.log(sglog.WARN, f"Schedule gives {classification}: no guarantee applies to this run")

        base_seed = self.args.seed_override
        if base_seed is not None and base_seed < 0:
            sglog.log(sglog.ERROR, f"--seed-override must be >= 0, got {base_seed}")
            return EXIT_USAGE
        if self.args.threads < 0:
            sglog.log(sglog.ERROR, f"--threads must be >= 0, got {self.args.threads}")
            return EXIT_USAGE
        result = run_ensemble(config, base_seed=base_seed, threads=self.args.threads)

        out_dir = self._output_dir(config)
        written = export_ensemble(result, config, out_dir, __version__)
        sglog.log(sglog.INFO, f"Wrote {len(written)} artifacts to {out_dir}")

        for failed in result.failed_results():
            sglog.log(sglog.WARN, "Failed:", failed)
        if result.diverged_fraction > config.max_divergence_fraction:
            sglog.log(sglog.WARN, f"Diverged fraction {result.diverged_fraction:g} exceeds "
                      f"max_divergence_fraction={config.max_divergence_fraction:g}")
        rc = result.exit_code(config.max_divergence_fraction)
        sglog.log(sglog.INFO, "Finishing stoptimer run. Return code=", rc)
        return rc

    def _schedule_spec(self) -> dict:
        spec = {"family": self.args.family, "p": self.args.p}
        if self.args.family in ("power", "log_power"):
            spec.update(q=self.args.q, scale=self.args.scale)
        elif self.args.family == "constant":
            spec["value"] = self.args.value
        else:
            spec["values"] = self.args.values
        return spec

    def classify(self) -> int:
        try:
            schedule = schedule_from_dict(self._schedule_spec())
        except (KeyError, ValueError) as err:
            sglog.log(sglog.ERROR, "Invalid schedule:", str(err).strip("'\""))
            return EXIT_USAGE
        classification = schedule.classify()
        print(f"{'schedule':<10} {schedule!r}")
        print(f"{'verdict':<10} {classification}")
        for power, test in zip(("1", "2", f"{schedule.p_exponent:g}"), classification.tests):
            print(f"{'sum^' + power:<10} {test}")
        return EXIT_OK

    def parse_inputs(self, args=None):
        # to include default value in --help output
        parser = argparse.ArgumentParser(prog="stoptimer", formatter_class=StoptimerArgsFormatter)
        self.parser = parser

        parser.add_argument("-D", "--loglevel", type=int, default=self.defaults["loglevel"],
                            choices=range(0, 5), help="Logging level 0(ERROR)..4(TRACE)")

        parser.add_argument("--version", action="store_true", default=False,
                            help="Print the version and exit")

        commands = parser.add_subparsers(dest="command")

        run_parser = commands.add_parser("run", formatter_class=StoptimerArgsFormatter,
                                         help="Run the SGD ensemble a config describes and export the artifacts")
        run_parser.add_argument("config", type=str,
                                help="Experiment config (JSON). Names that are not a file are looked up\n"
                                "in the bundled profiles, e.g. 'minimal.json'")
        run_parser.add_argument("-o", "--out", type=str, default=None,
                                help="Output directory. Falls back to output_dir of the config, then to\n"
                                f"${self.defaults['output_env']}, then to '{self.defaults['output']}'")
        run_parser.add_argument("-t", "--threads", type=int, default=self.defaults["threads"],
                                help="Number of worker processes, 0 = one per CPU")
        run_parser.add_argument("--seed-override", dest="seed_override", type=int, default=None,
                                help="Replace base_seed of the config; seeds are K .. K + n_trajectories - 1")

        classify_parser = commands.add_parser("classify", formatter_class=StoptimerArgsFormatter,
                                              help="Classify a step-size schedule without running anything")
        classify_parser.add_argument("--family", type=str, required=True,
                                     choices=["power", "log_power", "constant", "table"],
                                     help="Schedule family")
        classify_parser.add_argument("--q", type=float, default=None,
                                     help="Exponent q of power and log_power")
        classify_parser.add_argument("--scale", type=float, default=self.defaults["scale"],
                                     help="Scale of power and log_power")
        classify_parser.add_argument("--value", type=float, default=None,
                                     help="Step size of the constant family")
        classify_parser.add_argument("--values", type=float, nargs="+", default=None,
                                     help="Space-separated step sizes of the table family")
        classify_parser.add_argument("--p", type=float, default=self.defaults["p"],
                                     help="Exponent p > 2 of the relaxed condition")

        return parser.parse_args(args)


def main(input_args=None) -> None:
    '''
    Entry point of the stoptimer command-line tool.

    Parses the arguments, runs the selected subcommand and exits with its return code:
    0 if every enabled check passed, 1 if a check failed or too many trajectories diverged,
    2 for usage and config errors.

    Args:
        input_args: Optional list of command-line arguments to parse.
                   If None, arguments are read from sys.argv.
                   Example: ['run', 'minimal.json', '--out', 'results']
    '''
    stoptimer = Stoptimer(input_args)
    sys.exit(stoptimer.run())
