import argparse
import logging
import os
import sys

from .__about__ import __version__
from ._bench import ALGORITHMS, SWEEP_AXES, ExperimentConfig, RunReport, compare_algorithms, run_experiment, verify_inliers
from ._datagen import generate_instance
from ._errors import IvoteError, UsageError
from ._instance import load_instance, save_instance
from ._surface import model_tags
from ._tex import export_tex

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

THREADS_ENV = "IVOTE_THREADS"


def _float_list(text):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected a comma separated list of numbers, got {text!r}") from e


def _str_list(text):
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _add_instance_options(parser):
    parser.add_argument("--model", help=f"model tag, one of {', '.join(model_tags())}")
    parser.add_argument("--n", type=int, default=1000, help="number of items, scene points for posing models")
    parser.add_argument("--inlier-frac", type=_float_list, default=(0.1,), help="planted inlier fraction(s)")
    parser.add_argument("--noise", type=float, default=0.0, help="noise sigma, degrees for posing models")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--d", type=int, default=3, help="ambient dimension of hyperplane instances")


def _add_run_options(parser):
    _add_instance_options(parser)
    parser.add_argument("--instance", help="instance file to run on instead of generating one")
    parser.add_argument("--algo", type=_str_list, default=("gv",), help=f"comma separated, from {', '.join(ALGORITHMS)}")
    parser.add_argument("--eps", type=_float_list, default=(0.01,), help="tolerance, one value or one per coordinate")
    parser.add_argument("--repeat", type=int, default=1)
    parser.add_argument("--threads", type=int, default=1, help=f"worker threads; {THREADS_ENV} overrides")
    parser.add_argument("--max-depth", type=int, default=None)
    parser.add_argument("--out", help="CSV output path; the JSON report goes next to it")
    parser.add_argument("--tex", help="also write the operation-count curves as pgfplots code")


def build_parser():
    parser = argparse.ArgumentParser(prog="ivote", description="Geometric consensus by voting, with baselines and benchmarks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--verbose", "-v", action="store_true", help="log progress")
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen", help="generate an instance file")
    _add_instance_options(gen)
    gen.add_argument("--out", required=True, help="instance file to write")

    run = commands.add_parser("run", help="run algorithms on one instance configuration")
    _add_run_options(run)

    sweep = commands.add_parser("sweep", help="run algorithms over a range of n, inlier fractions or tolerances")
    _add_run_options(sweep)
    sweep.add_argument("--sweep", choices=SWEEP_AXES, default="n", help="swept quantity")
    sweep.add_argument("--values", type=_float_list, required=True, help="comma separated sweep values")

    verify = commands.add_parser("verify", help="filter the inliers of a posing report by angular error")
    verify.add_argument("report", help="JSON report written by run or sweep")
    verify.add_argument("--instance", required=True, help="instance file the report was computed on")
    verify.add_argument("--threshold", type=float, default=0.1, help="largest accepted angle in radians")
    verify.add_argument("--out", help="CSV output path of the verified report")

    compare = commands.add_parser("compare", help="crossover points of generalized voting against the baselines")
    compare.add_argument("reports", nargs="+", help="JSON reports over a common sweep")
    compare.add_argument("--out", help="CSV output path of the comparison table")
    return parser


def resolve_threads(requested):
    value = os.environ.get(THREADS_ENV)
    if value is None or not value.strip():
        return requested
    try:
        return int(value)
    except ValueError as e:
        raise UsageError(f"{THREADS_ENV} must be an integer, got {value!r}") from e


def _experiment_config(args, sweep_axis=None, sweep_values=()):
    model_tag = args.model
    if args.instance is not None:
        file_model = load_instance(args.instance).model_tag
        if model_tag is not None and model_tag != file_model:
            raise UsageError(f"--model {model_tag} disagrees with the {file_model} instance file")
        model_tag = file_model
    if model_tag is None:
        raise UsageError("--model is required without --instance")
    return ExperimentConfig(
        model_tag=model_tag, algos=args.algo, eps=args.eps, instance_path=args.instance,
        n=args.n, inlier_fractions=args.inlier_frac, noise=args.noise,
        sweep_axis=sweep_axis, sweep_values=sweep_values, repeat=args.repeat, seed=args.seed,
        out=args.out, threads=resolve_threads(args.threads), d=args.d, max_depth=args.max_depth,
    )


def _print_table(table):
    print(table.to_string(index=False) if not table.empty else "(no rows)")


def cmd_gen(args):
    if args.model not in model_tags():
        raise UsageError(f"unknown model {args.model!r}; choose from {', '.join(model_tags())}")
    if len(args.inlier_frac) != 1:
        raise UsageError("gen takes a single --inlier-frac")
    instance = generate_instance(args.model, args.n, args.inlier_frac[0], args.noise, args.seed, d=args.d)
    save_instance(instance, args.out)
    logger.info("wrote %d %s items to %s", instance.n, instance.model_tag, args.out)


def _report(report, args):
    _print_table(report.table())
    if args.tex is not None:
        export_tex(report, args.tex)


def cmd_run(args):
    _report(run_experiment(_experiment_config(args)), args)


def cmd_sweep(args):
    _report(run_experiment(_experiment_config(args, args.sweep, args.values)), args)


def cmd_verify(args):
    report = RunReport.from_json(args.report)
    verified = verify_inliers(report, load_instance(args.instance), args.threshold)
    _print_table(verified.table())
    if args.out is not None:
        verified.write(args.out)


def cmd_compare(args):
    table = compare_algorithms([RunReport.from_json(path) for path in args.reports])
    _print_table(table)
    if args.out is not None:
        table.to_csv(args.out, index=False)


COMMANDS = {
    "gen": cmd_gen,
    "run": cmd_run,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
    "compare": cmd_compare,
}


def main(argv=None):
    """Entry point of the ``ivote`` command; returns the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except UsageError as e:
        print(f"ivote: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (IvoteError, OSError, ValueError) as e:
        print(f"ivote: {e}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK
