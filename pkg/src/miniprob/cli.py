"""Command-line surface: case-study demos, trace summaries, plot-data export.

Exit codes: 0 success, 2 usage errors, 3 data errors (missing files, corrupt
or mismatched traces), 4 numeric failures during inference.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import demos
from .backends import TextBackend, load
from .exceptions import (
    CorruptMeta,
    DataFileMissing,
    MiniprobError,
    MissingChainFile,
    UnknownVariable,
)
from .stats import summary, write_plot_data

DEMO_DEFAULT_DRAWS = {
    "linear": 2000,
    "sp500": 2000,
    "disasters": 10000,
    "glm_linear": 2000,
    "glm_logistic": 5000,
}

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _default_seed() -> int:
    return int(os.environ.get("MINIPROB_SEED", "1"))


def _progress(chain, draw, total):
    sys.stderr.write(f"\rchain {chain}: {draw} of {total} complete")
    if draw == total:
        sys.stderr.write("\n")
    sys.stderr.flush()


def _run_demo(args) -> int:
    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    backend = TextBackend(os.path.join(out_dir, "trace"))
    draws = args.draws if args.draws is not None else DEMO_DEFAULT_DRAWS[args.name]
    progress = None if args.quiet else _progress

    if args.name == "linear":
        _, _, trace = demos.run_linear(draws, args.seed, backend, progress)
    elif args.name == "disasters":
        _, trace = demos.run_disasters(draws, args.seed, backend, progress)
    elif args.name == "sp500":
        _, trace = demos.run_sp500(draws, args.seed, args.data, backend, progress)
    elif args.name == "glm_linear":
        _, trace = demos.run_glm_linear(draws, args.seed, backend, progress)
    else:
        _, trace = demos.run_glm_logistic(draws, args.seed, backend, progress)

    _, text = summary(trace)
    with open(os.path.join(out_dir, "summary.txt"), "w", encoding="utf-8") as f:
        f.write(text + "\n")
    sys.stdout.write(text + "\n")
    write_plot_data(trace, os.path.join(out_dir, "plots"))
    return EXIT_OK


def _run_summary(args) -> int:
    trace = load(args.trace_dir)
    vars = args.vars.split(",") if args.vars else None
    _, text = summary(trace, vars=vars)
    sys.stdout.write(text + "\n")
    return EXIT_OK


def _run_plotdata(args) -> int:
    trace = load(args.trace_dir)
    vars = [args.var] if args.var else None
    for path in write_plot_data(trace, args.out, vars=vars):
        sys.stdout.write(path + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="miniprob",
        description="Bayesian model demos, trace summaries, and plot-data export.")
    sub = parser.add_subparsers(dest="command", required=True)

    demo = sub.add_parser("demo", help="run a bundled case-study workflow")
    demo.add_argument("name", choices=sorted(DEMO_DEFAULT_DRAWS))
    demo.add_argument("--draws", type=int, default=None,
                      help="posterior draws (default depends on the demo)")
    demo.add_argument("--seed", type=int, default=_default_seed(),
                      help="random seed (default: MINIPROB_SEED env var or 1)")
    demo.add_argument("--out", default="miniprob_out",
                      help="output directory for trace/, summary.txt, plots/")
    demo.add_argument("--data", default=None,
                      help="returns CSV for the sp500 demo (bundled fixture by default)")
    demo.add_argument("--quiet", action="store_true", help="suppress progress output")
    demo.set_defaults(fn=_run_demo)

    summ = sub.add_parser("summary", help="print posterior statistics for a stored trace")
    summ.add_argument("trace_dir")
    summ.add_argument("--vars", default=None, help="comma-separated variable names")
    summ.set_defaults(fn=_run_summary)

    plot = sub.add_parser("plotdata", help="export density/draw CSVs from a stored trace")
    plot.add_argument("trace_dir")
    plot.add_argument("--var", default=None, help="single variable (default: all)")
    plot.add_argument("--out", required=True, help="output directory")
    plot.set_defaults(fn=_run_plotdata)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (DataFileMissing, CorruptMeta, MissingChainFile, UnknownVariable) as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_DATA
    except MiniprobError as e:
        sys.stderr.write(f"numeric failure: {e}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
