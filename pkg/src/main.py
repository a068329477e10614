import argparse
import json
import logging
import math
import os
import sys

from utils.config import output_root
from utils.errors import QlgError

logger = logging.getLogger("QlgBurgers")


def setup_logging(root, verbose=False):
    os.makedirs(root, exist_ok=True)
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(os.path.join(root, 'qlg_burgers.log')),
            logging.StreamHandler()
        ],
        force=True,
    )


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qlg_burgers",
        description="Lattice-gas Burgers experiments: runs, comparisons, sweeps and presets.",
        epilog="Any configuration key can be overridden with a dotted flag, "
               "e.g. --model.theta 0.7854.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbs = parser.add_subparsers(dest="command", required=True)

    run = verbs.add_parser("run", help="run one experiment from a configuration file")
    run.add_argument("--config", required=True, help="TOML experiment file (or a provenance.toml)")

    compare = verbs.add_parser("compare", help="compare a run with another run or its reference")
    compare.add_argument("run_a", help="run id or run directory")
    compare.add_argument("run_b", nargs="?", default="reference",
                         help="run id, run directory or 'reference' (default)")
    compare.add_argument("--fit", action="store_true", help="fit Burgers coefficients to run_a")
    compare.add_argument("--output", help="write the per-snapshot errors to this CSV file")

    sweep = verbs.add_parser("sweep", help="parameter sweep around a base experiment")
    sweep.add_argument("kind", choices=["ensemble_noise", "grid_convergence", "angle_scan"])
    sweep.add_argument("--config", required=True, help="base experiment file")
    sweep.add_argument("--values", type=float, nargs="+",
                       help="ensemble sizes, lattice sizes or angles to visit")
    sweep.add_argument("--repeats", type=int, default=4, help="seeds pooled per ensemble size")

    preset = verbs.add_parser("preset", help="reproduce a figure setup")
    preset.add_argument("name", choices=["fig1", "fig2"])

    report = verbs.add_parser("theory-report", help="print the analytic coefficients of a model")
    report.add_argument("--config", help="experiment file supplying [model] and [grid]")
    report.add_argument("--rho", type=float, default=1.0, help="density to evaluate at")
    report.add_argument("--table", help="write the sampled coefficient table to this CSV file")

    runs = verbs.add_parser("runs", help="list the run registry")
    runs.add_argument("--limit", type=int, default=20)
    runs.add_argument("--kind", help="only runs of this kind (run, preset, sweep)")
    runs.add_argument("--delete", metavar="RUN", help="remove a run directory and its entry")

    return parser


def _spec_from(path, overrides):
    from experiments import ExperimentSpec, load_spec

    if path is None:
        from utils.config import apply_overrides

        return ExperimentSpec.from_dict(apply_overrides({"model": {"kind": "quantum"}}, overrides))
    return load_spec(path, overrides)


def _sweep_values(kind, values):
    if values is None or kind == "angle_scan":
        return values
    return [int(v) for v in values]


def dispatch(args, overrides):
    from experiments import ExperimentRunner, remove_run, write_coefficient_table
    from theory import theory_report

    if args.command == "theory-report":
        spec = _spec_from(args.config, overrides)
        report = theory_report(spec.model, spec.grid, args.rho)
        for key, value in report.to_flat_dict().items():
            print(f"{key} = {value}")
        if args.table:
            write_coefficient_table(args.table, spec.model, spec.grid)
            logger.info(f"Coefficient table written to {args.table}")
        return 0

    if args.command != "run" and args.command != "sweep" and overrides:
        logger.warning(f"Ignoring overrides for '{args.command}': {' '.join(overrides)}")

    runner = ExperimentRunner()

    if args.command == "run":
        result = runner.run(_spec_from(args.config, overrides))
        print(result.path)
        if result.report is not None:
            print(json.dumps(result.report.summary(), indent=2))
    elif args.command == "compare":
        report = runner.compare(args.run_a, args.run_b, fit=args.fit, output=args.output)
        print(json.dumps(report.summary(), indent=2))
    elif args.command == "sweep":
        spec = _spec_from(args.config, overrides)
        path, rows = runner.sweep(args.kind, spec, _sweep_values(args.kind, args.values),
                                  args.repeats)
        print(path)
        for row in rows:
            print(", ".join(f"{k}={v:.6g}" if isinstance(v, float) and math.isfinite(v)
                            else f"{k}={v}" for k, v in row.items()))
    elif args.command == "preset":
        for result in runner.run_preset(args.name):
            print(result.path)
    elif args.command == "runs":
        if args.delete:
            remove_run(runner, args.delete)
            print(f"Removed {args.delete}")
            return 0
        for record in runner.registry.list_runs(limit=args.limit, kind=args.kind):
            print(f"{record['id']:>5}  {record['status']:<9} {record['kind']:<7} "
                  f"{record['name']:<28} {record['path']}")
    return 0


def main(argv=None):
    parser = build_parser()
    args, overrides = parser.parse_known_args(argv)
    setup_logging(str(output_root()), args.verbose)
    logger.info(f"qlg_burgers {args.command} started")

    try:
        return dispatch(args, overrides)
    except QlgError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
