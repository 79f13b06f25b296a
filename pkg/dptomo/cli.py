"""The `tomo` command line."""
import argparse
import sys
from pathlib import Path
from typing import List, Optional

from loguru import logger

from . import __version__
from .core.config import ConfigError, ExperimentConfig, load_config
from .core.probes import ProbeBasis

SUBCOMMANDS = {
    "represent": "represent",
    "represent-sweep": "represent_sweep",
    "noise-sweep": "noise_sweep",
    "reconstruct-sweep": "reconstruct_sweep",
    "witness-table": "witness_table",
    "purity-table": "purity_table",
    "grid": None,
}
HELP = {
    "represent": "Represent each state on a single probe grid.",
    "represent-sweep": "Represent each state on every grid of a sweep.",
    "noise-sweep": "Perturb the fitted coefficients with Gaussian noise.",
    "reconstruct-sweep": "Reconstruct each state from sampled data patterns.",
    "witness-table": "Evaluate the witness of each precise state on its representation.",
    "purity-table": "Compare the purity of each state and its representation.",
    "grid": "Write the probe amplitudes of every grid as xi,mode,re,im.",
}
EPILOG = """\
CSV columns:
  cell keys    state, kind, N, d (square), dr and dphi (helical),
               sigma (noise-sweep), n_rep (reconstruct-sweep)
  quantities   fidelity, purity, hs_distance, trace_value, negativity as
               <name>_mean, _std, _min, _max over trials; target_purity,
               target_trace_value, trace_difference, min_eigenvalue, detected
  solver       objective, iterations, converged, constraint_violation, trials
With --raw the per-trial rows are written to <output stem>.raw.csv.

exit codes: 0 success, 2 invalid config, 3 a fit did not converge (results
are still written and the rows flagged), 1 any other failure.
"""

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_NOT_CONVERGED = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tomo",
        description="Data-pattern tomography with coherent-state probes.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"dptomo {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    for name in SUBCOMMANDS:
        sub = subparsers.add_parser(
            name,
            help=HELP[name],
            epilog=EPILOG,
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )
        sub.add_argument("config", help="YAML/JSON config file, or zoo:<preset>.")
        sub.add_argument("--seed", type=int, help="Override master_seed.")
        sub.add_argument("--output", help="Override output_path.")
        sub.add_argument("--threads", type=int, help="Override threads.")
        sub.add_argument("--raw", action="store_true", help="Also write per-trial rows.")
        sub.add_argument(
            "--dump-states",
            action="store_true",
            help="Write every assembled density matrix next to the output.",
        )
        sub.add_argument("--plot-data", metavar="DIR", help="Write x,y series to DIR.")
        sub.add_argument("--chart", metavar="PATH", help="Save a fidelity chart (.html/.json).")
        sub.add_argument(
            "--verbosity",
            default="info",
            choices=["critical", "error", "warning", "success", "info", "debug", "trace"],
        )
        sub.add_argument(
            "--no-log-file",
            action="store_true",
            help="Do not write the JSON-lines log to ~/.dptomo.",
        )
    return parser


def _configure(args: argparse.Namespace) -> ExperimentConfig:
    config = load_config(args.config)
    experiment = SUBCOMMANDS[args.command]
    if experiment is not None and config.experiment != experiment:
        logger.debug(f"Running {experiment} instead of the config's {config.experiment}")
    return config.override(
        experiment=experiment,
        master_seed=args.seed,
        output_path=args.output,
        threads=args.threads,
        raw=True if args.raw else None,
        dump_states=True if args.dump_states else None,
    )


def _write_grids(config: ExperimentConfig) -> None:
    output = Path(config.output_path)
    output.parent.mkdir(parents=True, exist_ok=True)
    for i, grid in enumerate(config.grids):
        path = output if len(config.grids) == 1 else output.with_name(f"{output.stem}_{i}.csv")
        basis = ProbeBasis.coherent(grid, config.space)
        basis.to_csv(path)
        logger.info(f"Wrote {basis} to {path}")


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    sink = logger.add(sys.stderr, level=args.verbosity.upper(), format="{level.icon} {message}")
    try:
        try:
            config = _configure(args)
        except ConfigError as e:
            logger.error(f"Invalid config {args.config}: {e}")
            return EXIT_CONFIG

        if args.command == "grid":
            _write_grids(config)
            return EXIT_OK

        try:
            E = config.execute(log_file=not args.no_log_file)
        except RuntimeError as e:
            logger.critical(str(e))
            return EXIT_FAILURE

        E.write()
        if args.plot_data:
            E.write_plot_data(args.plot_data)
        if args.chart:
            E.visualize().save(args.chart)
        E.summarize(style="ascii")

        if not E.converged:
            logger.error("Some fits did not converge; see the converged column.")
            return EXIT_NOT_CONVERGED
        logger.success(f"{E} done.")
        return EXIT_OK
    finally:
        logger.remove(sink)


if __name__ == "__main__":
    sys.exit(main())
