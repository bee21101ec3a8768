"""Command-line interface.

Subcommands:

- ``run <config.json>``      run an experiment and emit its report files
- ``report <results-dir>``   re-emit CSV or Markdown files from report.json
- ``cd --k K --d D``         print a Nemenyi critical difference
- ``compare <scores.csv>``   Friedman or pairwise Wilcoxon on a score matrix

Exit codes: 0 on success, 1 when the run finished but recorded cell errors,
2 on a fatal error.  Fatal errors and recorded cell errors are printed to
stderr as a JSON error list.  BOOSTBENCH_MAX_WORKERS caps run concurrency.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__, bench
from .errors import BoostBenchError
from .stats import (
    friedman_test,
    load_score_matrix,
    nemenyi_cd,
    wilcoxon_signed_rank,
)


def _error_list(errors) -> str:
    return json.dumps({"errors": errors}, sort_keys=True)


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return [float(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return float(value)
    return value


def _cmd_run(args) -> int:
    config = bench.load_config(args.config)
    out_dir = args.output or config.output_dir
    formats = tuple(args.format.split(",")) if args.format else ("csv", "md")
    report = bench.run_experiment(config)
    written = bench.emit_report(report, out_dir, formats=formats)
    print(f"fold rows: {len(report.folds)}  errors: {len(report.errors)}  "
          f"wall time: {report.total_time:.1f}s")
    for path in written:
        print(f"wrote {path}")
    if report.errors:
        print(_error_list([e.to_dict() for e in report.errors]), file=sys.stderr)
        return 1
    return 0


def _cmd_report(args) -> int:
    path = os.path.join(args.results_dir, "report.json")
    with open(path, encoding="utf-8") as fh:
        report = bench.ExperimentReport.from_json(fh.read())
    written = bench.emit_report(report, args.results_dir, formats=(args.format,))
    for p in written:
        print(f"wrote {p}")
    return 0


def _cmd_cd(args) -> int:
    value = nemenyi_cd(args.k, args.d, args.alpha)
    print(f"{value:.6f}")
    return 0


def _cmd_compare(args) -> int:
    matrix = load_score_matrix(args.scores)
    if args.test == "friedman":
        result = friedman_test(matrix, higher_better=not args.lower_better)
    else:
        if matrix.n_models != 2:
            raise BoostBenchError(
                f"wilcoxon needs exactly 2 model columns, got {matrix.n_models}")
        result = wilcoxon_signed_rank(matrix.values[:, 0], matrix.values[:, 1],
                                      alternative=args.alternative)
    doc = {
        "method": result.method,
        "statistic": result.statistic,
        "p_value": result.p_value,
        "alternative": result.alternative,
        "models": list(matrix.model_names),
        "details": {k: _jsonable(v) for k, v in result.details.items()},
    }
    print(json.dumps(doc, sort_keys=True))
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="boostbench",
        description="Boosted-tree benchmarking: run experiments, emit reports, "
                    "compute rank statistics.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config", help="experiment config JSON file")
    p_run.add_argument("--output", help="output directory (default: config's)")
    p_run.add_argument("--format", help="comma list of csv,md (default both)")
    p_run.set_defaults(fn=_cmd_run)

    p_rep = sub.add_parser("report", help="re-emit files from report.json")
    p_rep.add_argument("results_dir", help="directory holding report.json")
    p_rep.add_argument("--format", choices=("csv", "md"), default="csv")
    p_rep.set_defaults(fn=_cmd_report)

    p_cd = sub.add_parser("cd", help="print a Nemenyi critical difference")
    p_cd.add_argument("--k", type=int, required=True, help="number of models")
    p_cd.add_argument("--d", type=int, required=True, help="number of datasets")
    p_cd.add_argument("--alpha", type=float, default=0.05, choices=(0.05, 0.10))
    p_cd.set_defaults(fn=_cmd_cd)

    p_cmp = sub.add_parser("compare", help="test a score-matrix CSV")
    p_cmp.add_argument("scores", help="CSV: header of model names, row per dataset")
    p_cmp.add_argument("--test", choices=("wilcoxon", "friedman"),
                       default="friedman")
    p_cmp.add_argument("--alternative", choices=("greater", "less", "two-sided"),
                       default="two-sided", help="wilcoxon alternative")
    p_cmp.add_argument("--lower-better", action="store_true",
                       help="rank lower scores as better (friedman)")
    p_cmp.set_defaults(fn=_cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except BoostBenchError as exc:
        print(_error_list([{"type": type(exc).__name__, "message": str(exc)}]),
              file=sys.stderr)
        return 2
    except OSError as exc:
        print(_error_list([{"type": "OSError", "message": str(exc)}]),
              file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
