"""Command-line front end.

Subcommands::

    rpmsim sample      --process pdp-new --alpha 0.5 --theta 10 --paths 20 --out paths.csv
    rpmsim compare     --family pdp --paths 1000 --out table.json
    rpmsim lemma-prob  --i 1,10,100 --alpha 0.1 --theta 1 --mc-reps 100000
    rpmsim order-prob  --process nigp-stick --theta 1 --n 50 --reps 500 --i 1,10,20,30,40
    rpmsim moments     --process pdp --alpha 0.1 --theta 1 --hA 0.5 --eps 0.1

Exit status is 0 on success, 2 for an invalid configuration and 3 when a
numerical routine fails.  Nothing is written to ``--out`` unless the whole
command succeeds.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import math
import os
import sys
import tempfile
from decimal import Decimal, InvalidOperation

import numpy as np

from . import __version__
from .diagnostics import (
    PROCESSES,
    ProcessSpec,
    chebyshev_bound_nigp,
    chebyshev_bound_pdp,
    empirical_order_probs,
    error_report,
    lemma1_prob,
    lemma1_prob_mc,
    mc_standard_error,
    nigp_moments,
    pdp_moments,
    simulate_paths,
)
from .errors import DomainError, NumericalError
from .random_measures import BaseMeasure, PdpParams
from .rng import RngStream

log = logging.getLogger("rpmsim")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

DEFAULT_GRID = "0.1:1.0:0.1"
# (i, alpha, theta) triples reported by default by lemma-prob
LEMMA_DEFAULT_I = (1, 10, 100)
LEMMA_DEFAULT_ALPHA = (0.1, 0.5, 0.9)
LEMMA_DEFAULT_THETA = (1.0, 10.0)
COMPARE_ALPHAS = (0.1, 0.5, 0.9)
COMPARE_THETAS = (1.0, 10.0, 50.0)


# ---------------------------------------------------------------------------
# Argument types
# ---------------------------------------------------------------------------

def parse_grid(text: str) -> np.ndarray:
    """``start:stop:step`` with ``stop`` included; decimal arithmetic avoids
    drift such as 0.30000000000000004."""
    try:
        start, stop, step = (Decimal(part) for part in text.split(":"))
    except (ValueError, InvalidOperation):
        raise DomainError(f"grid must look like start:stop:step, got {text!r}") from None
    if not (step > 0 and stop >= start):
        raise DomainError(f"grid needs step > 0 and stop >= start, got {text!r}")
    count = int((stop - start) / step) + 1
    if count > 10 ** 6:
        raise DomainError("grid has more than 10^6 points")
    return np.array([float(start + k * step) for k in range(count)])


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _seed(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def _cell(value):
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return value


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _json_text(obj):
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _write_atomic(path, text):
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".rpmsim-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(args, files):
    """``files`` maps a path suffix ('' for the main file) to its text.

    Everything is rendered before the first write, so a failure leaves no
    partial output behind.
    """
    if args.out is None:
        sys.stdout.write(files[""])
        return
    for suffix, text in files.items():
        _write_atomic(args.out + suffix, text)


# ---------------------------------------------------------------------------
# Process construction
# ---------------------------------------------------------------------------

def _default_n(kind):
    if kind.startswith("nigp"):
        return 50
    if kind == "pdp-stick":
        return 100 * 500
    return 100


def _process_from_args(args, kind=None):
    kind = kind or args.process
    n = args.n if args.n is not None else _default_n(kind)
    theta = args.theta if args.theta is not None else 1.0
    alpha = args.alpha if args.alpha is not None else 0.0
    return ProcessSpec(kind, n=n, m=args.m, alpha=alpha, theta=theta,
                       eps=getattr(args, "eps", None))


def _config(args):
    # workers and the output path do not affect results
    skip = {"func", "out", "workers"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_sample(args):
    process = _process_from_args(args)
    grid = parse_grid(args.grid)
    base = BaseMeasure.parse(args.base)
    cdfs, degenerate = simulate_paths(process, base, grid, args.paths, RngStream(args.seed),
                                      workers=args.workers)
    bad = [int(j) for j in np.flatnonzero(degenerate)]
    for j in bad:
        log.warning("path %d: stick-breaking fractions collapsed (degenerate)", j)
    metadata = {"degenerate_paths": len(bad), "degenerate_path_ids": bad}
    config = _config(args)
    if args.format == "json":
        doc = {"config": config, "grid": grid.tolist(), "paths": cdfs.tolist(), "metadata": metadata}
        _emit(args, {"": _json_text(doc)})
        return EXIT_OK
    rows = ((j, float(x), float(f)) for j in range(len(cdfs)) for x, f in zip(grid, cdfs[j]))
    files = {"": _csv_text(["path_id", "x", "F"], rows)}
    files[".meta.json"] = _json_text({"config": config, "metadata": metadata})
    _emit(args, files)
    return EXIT_OK


def _compare_cells(args):
    if args.family == "pdp":
        alphas = args.alpha or list(COMPARE_ALPHAS)
        thetas = args.theta or list(COMPARE_THETAS)
        n = args.n if args.n is not None else 100
        stick_n = args.stick_n if args.stick_n is not None else n * args.m
        for alpha, theta in itertools.product(alphas, thetas):
            yield (alpha, theta,
                   ProcessSpec("pdp-new", n=n, m=args.m, alpha=alpha, theta=theta),
                   ProcessSpec("pdp-stick", n=stick_n, alpha=alpha, theta=theta))
    else:
        if args.alpha:
            raise DomainError("the nigp family has no alpha parameter")
        n = args.n if args.n is not None else 50
        stick_n = args.stick_n if args.stick_n is not None else n
        for theta in args.theta or [1.0]:
            yield (None, theta, ProcessSpec("nigp-new", n=n, theta=theta),
                   ProcessSpec("nigp-stick", n=stick_n, theta=theta))


def _finite_or_none(value):
    return None if math.isnan(value) else value


def _summary(report):
    # NaN (no usable paths) is written as null so the JSON stays standard
    return {"max_mean_error": _finite_or_none(report.max_mean_error),
            "max_sd_error": _finite_or_none(report.max_sd_error),
            "paths": report.paths, "degenerate_paths": report.degenerate_paths}


def cmd_compare(args):
    grid = parse_grid(args.grid)
    base = BaseMeasure.parse(args.base)
    if args.paths is None:
        args.paths = 1000 if args.family == "pdp" else 500
    if args.paths < 2:
        raise DomainError("compare needs at least 2 paths per method")
    cells = list(_compare_cells(args))  # validates every cell before sampling
    out = []
    for c, (alpha, theta, new, stick) in enumerate(cells):
        # both methods share the cell's streams, so atoms are common
        stream = RngStream(args.seed, c * args.paths)
        r_new = error_report(new, args.paths, grid, base, stream, workers=args.workers)
        r_stick = error_report(stick, args.paths, grid, base, stream, workers=args.workers)
        if r_stick.degenerate_paths:
            log.warning("alpha=%s theta=%s: %d stick-breaking paths degenerate",
                        alpha, theta, r_stick.degenerate_paths)
        out.append({"alpha": alpha, "theta": theta,
                    "new": _summary(r_new), "stick": _summary(r_stick),
                    "degenerate_paths": r_new.degenerate_paths + r_stick.degenerate_paths})
    if args.format == "csv":
        rows = [(cell["alpha"], cell["theta"], method, *cell[method].values())
                for cell in out for method in ("new", "stick")]
        header = ["alpha", "theta", "method", "max_mean_error", "max_sd_error",
                  "paths", "degenerate_paths"]
        _emit(args, {"": _csv_text(header, rows)})
    else:
        _emit(args, {"": _json_text({"config": _config(args), "cells": out, "seed": args.seed})})
    return EXIT_OK


def cmd_lemma_prob(args):
    triples = list(itertools.product(args.i or LEMMA_DEFAULT_I,
                                     args.alpha or LEMMA_DEFAULT_ALPHA,
                                     args.theta or LEMMA_DEFAULT_THETA))
    for i, alpha, theta in triples:
        if i < 1:
            raise DomainError(f"i must be positive, got {i}")
        PdpParams(alpha, theta)
    rows = []
    for k, (i, alpha, theta) in enumerate(triples):
        row = [i, alpha, theta, lemma1_prob(i, alpha, theta)]
        if args.mc_reps:
            mc = lemma1_prob_mc(i, alpha, theta, args.mc_reps, RngStream(args.seed, k))
            row += [mc, mc_standard_error(mc, args.mc_reps)]
        rows.append(row)
    header = ["i", "alpha", "theta", "prob"] + (["prob_mc", "se"] if args.mc_reps else [])
    if args.format == "json":
        doc = {"config": _config(args), "rows": [dict(zip(header, r)) for r in rows]}
        _emit(args, {"": _json_text(doc)})
    else:
        _emit(args, {"": _csv_text(header, rows)})
    return EXIT_OK


def cmd_order_prob(args):
    process = _process_from_args(args)
    indices = args.i or [1, 10, 20, 30, 40]
    length = process.n * process.m if process.kind == "pdp-new" else process.n
    if process.eps is None and max(indices) + 1 > length:
        raise DomainError(f"index {max(indices)} + 1 exceeds truncation length {length}")
    if min(indices) < 1:
        raise DomainError("indices are 1-based and must be positive")
    probs = empirical_order_probs(process, indices, args.reps, RngStream(args.seed))
    rows = [(i, float(p)) for i, p in zip(indices, probs)]
    if args.format == "json":
        doc = {"config": _config(args), "rows": [{"i": i, "prob": p} for i, p in rows]}
        _emit(args, {"": _json_text(doc)})
    else:
        _emit(args, {"": _csv_text(["i", "prob"], rows)})
    return EXIT_OK


def cmd_moments(args):
    thetas = args.theta or [1.0]
    rows = []
    for theta in thetas:
        for hA in args.hA:
            if args.process == "pdp":
                alpha = args.alpha if args.alpha is not None else 0.0
                params = PdpParams(alpha, theta)
                mp = pdp_moments(params, hA)
                bound = None if args.eps is None else chebyshev_bound_pdp(params, hA, args.eps)
            else:
                if args.alpha is not None:
                    raise DomainError("nigp has no alpha parameter")
                alpha = None
                mp = nigp_moments(theta, hA)
                bound = None if args.eps is None else chebyshev_bound_nigp(theta, hA, args.eps)
            rows.append([args.process, alpha, theta, hA, mp.mean, mp.variance, bound])
    header = ["process", "alpha", "theta", "hA", "mean", "variance", "chebyshev_bound"]
    if args.format == "json":
        doc = {"config": _config(args), "rows": [dict(zip(header, r)) for r in rows]}
        _emit(args, {"": _json_text(doc)})
    else:
        _emit(args, {"": _csv_text(header, rows)})
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--seed", type=_seed, default=0, help="master seed (64-bit unsigned)")
    common.add_argument("--workers", type=_positive_int, default=1)

    parser = argparse.ArgumentParser(prog="rpmsim", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", parents=[common], help="write random CDF paths on a grid")
    p.add_argument("--process", choices=PROCESSES, required=True)
    p.add_argument("--alpha", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--n", type=int, help="truncation level (default depends on the process)")
    p.add_argument("--m", type=int, default=500, help="stable weights per copy for pdp-new")
    p.add_argument("--eps", type=float, help="epsilon stopping rule for pdp-stick")
    p.add_argument("--paths", type=_positive_int, default=1000)
    p.add_argument("--grid", default=DEFAULT_GRID)
    p.add_argument("--base", default="uniform:0,1")
    p.set_defaults(func=cmd_sample, default_format="csv")

    p = sub.add_parser("compare", parents=[common], help="new vs stick-breaking error table")
    p.add_argument("--family", choices=("pdp", "nigp"), default="pdp")
    p.add_argument("--alpha", type=_float_list, help="comma-separated alphas")
    p.add_argument("--theta", type=_float_list, help="comma-separated thetas")
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int, default=500)
    p.add_argument("--stick-n", type=int, help="stick-breaking truncation (default n*m for pdp)")
    p.add_argument("--paths", type=int)
    p.add_argument("--grid", default=DEFAULT_GRID)
    p.add_argument("--base", default="uniform:0,1")
    p.set_defaults(func=cmd_compare, default_format="json")

    p = sub.add_parser("lemma-prob", parents=[common],
                       help="probability that consecutive stick weights are ordered")
    p.add_argument("--i", type=_int_list)
    p.add_argument("--alpha", type=_float_list)
    p.add_argument("--theta", type=_float_list)
    p.add_argument("--mc-reps", type=int, default=0, help="add a Monte Carlo column")
    p.set_defaults(func=cmd_lemma_prob, default_format="csv")

    p = sub.add_parser("order-prob", parents=[common],
                       help="simulated P(p_{i+1} < p_i) in generation order")
    p.add_argument("--process", choices=PROCESSES, default="nigp-stick")
    p.add_argument("--alpha", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int, default=500)
    p.add_argument("--eps", type=float)
    p.add_argument("--reps", type=_positive_int, default=500)
    p.add_argument("--i", type=_int_list)
    p.set_defaults(func=cmd_order_prob, default_format="csv")

    p = sub.add_parser("moments", parents=[common], help="exact mean, variance and Chebyshev bound")
    p.add_argument("--process", choices=("pdp", "nigp"), required=True)
    p.add_argument("--alpha", type=float)
    p.add_argument("--theta", type=_float_list)
    p.add_argument("--hA", type=_float_list, default=[0.5])
    p.add_argument("--eps", type=float)
    p.set_defaults(func=cmd_moments, default_format="csv")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(format="warning: %(message)s", level=logging.WARNING, stream=sys.stderr)
    args = build_parser().parse_args(argv)
    if args.format is None:
        args.format = args.default_format
    del args.default_format
    try:
        return args.func(args)
    except DomainError as exc:
        print(f"rpmsim: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, FloatingPointError) as exc:
        print(f"rpmsim: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
