"""Command line entry point: ``ecprune run --spec experiment.yaml``."""
import argparse
import logging
import sys
from dataclasses import replace

from .harness import ExperimentSpec, run_experiment, write_report


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ecprune", description="Pruning benchmark harness.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment matrix from a YAML spec")
    run.add_argument("--spec", required=True, help="path to the YAML experiment spec")
    run.add_argument("--out", required=True, help="report output path")
    run.add_argument("--format", choices=["csv", "json"], default="csv")
    run.add_argument("--jobs", type=int, default=1, help="parallel workers (one seed per job)")
    run.add_argument("--subset", type=int, default=None, help="samples used for the score expectation")
    run.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    spec = ExperimentSpec.load(args.spec)
    if args.subset is not None:
        spec = replace(spec, expectation_subset=args.subset)
    report = run_experiment(spec, jobs=args.jobs)
    write_report(report, args.out, args.format)
    failed = sum(r.failed for r in report.rows)
    if failed:
        print(f"{failed} of {len(report.rows)} cells failed", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
