"""Experiment driver.

    lab run <config.ini>     execute one experiment, write manifest + CSVs
    lab list                 print registered experiments
    lab plot <run_dir>       collect plot-ready CSV curves for a finished run

Exit codes: 0 all criteria pass, 2 criterion failure, 3 solver instability,
4 configuration error.  LAB_OUTPUT_DIR overrides the configured output
directory; LAB_THREADS caps BLAS/FFT threads for deterministic timing.
"""

import argparse
import os
import sys

from .errors import ConfigError, SolverInstabilityError, LabError
from .experiments import (EXPERIMENTS, ExperimentConfig, emit_plot_data,
                          run_experiment)


def _apply_thread_env():
    threads = os.environ.get("LAB_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, threads)


def main(argv=None):
    _apply_thread_env()
    parser = argparse.ArgumentParser(prog="lab", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run one experiment from an ini config")
    p_run.add_argument("config")
    p_run.add_argument("--output-dir", default=None)
    sub.add_parser("list", help="list registered experiments")
    p_plot = sub.add_parser("plot", help="emit plot data for a finished run")
    p_plot.add_argument("run_dir")
    args = parser.parse_args(argv)

    if args.command == "list":
        for name in sorted(EXPERIMENTS):
            print(name)
        return 0

    if args.command == "plot":
        try:
            paths, warnings = emit_plot_data(args.run_dir)
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 4
        for p in paths:
            print(p)
        for w in warnings:
            print(f"warning: {w}", file=sys.stderr)
        return 0

    try:
        cfg = ExperimentConfig.from_ini(args.config)
        if args.output_dir:
            cfg.output_dir = args.output_dir
        manifest = run_experiment(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 4
    except SolverInstabilityError as exc:
        print(f"solver instability: {exc}", file=sys.stderr)
        return 3
    except LabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3

    for c in manifest.criteria:
        flag = "PASS" if c.passed else "FAIL"
        print(f"[{flag}] {manifest.experiment}: {c.name} = {c.measured:.6g} "
              f"({c.comparison} {c.tolerance:g}) {c.details}")
    print(f"status: {manifest.status}")
    return 0 if manifest.all_passed else 2


if __name__ == "__main__":
    sys.exit(main())
