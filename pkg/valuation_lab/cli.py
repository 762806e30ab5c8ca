"""
Command-line interface: ``valuation-lab <subcommand> [flags]``.

Exit status is 0 when the command succeeds and every checked property holds, 1 when a
property fails (the report is still written) and 2 on invalid input.
"""

import argparse
import logging
import sys
from typing import Any, Dict, Optional, Sequence

import numpy as np

from . import __version__
from .config import DEFAULT_TOLERANCES
from .exceptions import InvalidDocument, InvalidParameter, ValuationLabError
from .functions import (
    GridFunction,
    SimpleFunction,
    check_growth,
    indicator_distance,
    radial_membership_and_K_probe,
)
from .geometry import Box, dyadic_inner_cubes, random_polytope
from .harness import (
    EXTRACTION_ALPHAS,
    FAMILIES,
    PROPERTIES,
    SuiteConfig,
    case_seed,
    family_factory,
    oracle_crosscheck,
    run_suite,
)
from .serialization import (
    function_from_document,
    grid_function_to_document,
    matrix_to_document,
    polytope_from_document,
    read_document,
    spec_from_document,
    spec_to_document,
    support_from_document,
    write_document,
    xi_from_document,
)
from .valuation import extract_xi_and_s, moment_of_simple, zero_structure

logger = logging.getLogger(__name__)

DEFAULT_GAMMAS = (3.0, 5.0)


def _require_flag(args: argparse.Namespace, name: str) -> Any:
    value = getattr(args, name)
    if value is None:
        raise InvalidDocument(f"{args.command} requires --{name.replace('_', '-')}")
    return value


def _single_dim(args: argparse.Namespace, default: int = 2) -> int:
    if not args.dim:
        return default
    if len(args.dim) > 1:
        raise InvalidParameter(f"{args.command} takes one --dim, got {args.dim}")
    return args.dim[0]


def _is_function_document(doc: Any) -> bool:
    return isinstance(doc, dict) and ("pieces" in doc or "cells" in doc)


def _read_function(path: str):
    doc = read_document(path)
    if _is_function_document(doc):
        return function_from_document(doc)
    return SimpleFunction.indicator(support_from_document(doc))


def cmd_moment(args: argparse.Namespace) -> int:
    doc = read_document(_require_flag(args, "input"))
    if _is_function_document(doc):
        h = function_from_document(doc)
        moment = moment_of_simple(h)
    else:
        moment = support_from_document(doc).moment
    write_document(matrix_to_document(moment), args.out)
    return 0


def cmd_psi(args: argparse.Namespace) -> int:
    spec = spec_from_document(read_document(_require_flag(args, "spec")))
    valuation = family_factory(args.family)(spec)
    h = _read_function(args.input) if args.input else SimpleFunction.zero(spec.dim)
    document = matrix_to_document(valuation(h))
    document["spec"] = spec_to_document(spec)
    write_document(document, args.out)
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    options: Dict[str, Any] = {"master_seed": args.seed, "family": args.family, "parallel": True}
    if args.dim is not None:
        options["dims"] = tuple(args.dim)
    if args.p is not None:
        options["p_values"] = (args.p,)
    if args.cases is not None:
        options["cases_per_property"] = args.cases
    if args.samples is not None:
        options["mc_samples"] = args.samples
    if args.tol is not None:
        options["tolerances"] = {
            name: args.tol for name, prop in PROPERTIES.items() if prop.overridable
        }
    report = run_suite(SuiteConfig(**options))
    write_document(report.to_dict(), args.out)
    for name in report.failed_properties():
        result = report.properties[name]
        print(
            f"FAIL {name}: max residual {result.max_residual:.6g} > {result.tolerance:.3g}, "
            f"case {result.argmax_case}",
            file=sys.stderr,
        )
    return 0 if report.passed else 1


def cmd_extract(args: argparse.Namespace) -> int:
    spec = spec_from_document(read_document(_require_flag(args, "spec")))
    valuation = family_factory(args.family)(spec)
    if args.input:
        support = support_from_document(read_document(args.input))
    else:
        support = Box.cube([0.0] * spec.dim, 1.0)
    report = extract_xi_and_s(valuation, EXTRACTION_ALPHAS, support)
    zero = zero_structure(valuation)
    tol = args.tol if args.tol is not None else DEFAULT_TOLERANCES.composed
    passed = report.max_fit_residual <= tol and zero.conformant
    document = report.to_dict()
    document.update({"zero_structure": zero.to_dict(), "tolerance": tol, "passed": passed})
    write_document(document, args.out)
    return 0 if passed else 1


def cmd_approx(args: argparse.Namespace) -> int:
    polytope = polytope_from_document(read_document(_require_flag(args, "input")))
    delta = _require_flag(args, "delta")
    p = args.p if args.p is not None else 1.0
    cells, gap = dyadic_inner_cubes(polytope, delta)
    approx = GridFunction.indicator_of_inner_cells(polytope, delta)
    distance = indicator_distance(1.0, cells, polytope, p)
    error = float(np.linalg.norm(moment_of_simple(approx) - polytope.moment))
    document = {
        "kind": "inner_approximation",
        "delta": delta,
        "cells": len(cells),
        "gap": gap,
        "p": p,
        "distance": distance.exact,
        "distance_bound": distance.bound,
        "moment_error": error,
        "function": grid_function_to_document(approx),
    }
    write_document(document, args.out)
    return 0


def cmd_probe_growth(args: argparse.Namespace) -> int:
    doc = read_document(_require_flag(args, "input"))
    if isinstance(doc, dict) and "xi" in doc:
        doc = doc["xi"]
    xi = xi_from_document(doc)
    p = args.p if args.p is not None else xi.exponent_p
    n = _single_dim(args)
    growth = check_growth(xi, p=p)
    gammas = args.gamma or DEFAULT_GAMMAS
    probes = [radial_membership_and_K_probe(xi, p, n, gamma) for gamma in gammas]
    document = {
        "kind": "growth_probe",
        "growth": growth.to_dict(),
        "probes": [probe.to_dict() for probe in probes],
        "passed": growth.passed and all(probe.passed for probe in probes),
    }
    write_document(document, args.out)
    return 0 if document["passed"] else 1


def cmd_crosscheck(args: argparse.Namespace) -> int:
    samples = args.samples if args.samples is not None else 10**6
    if args.input:
        targets = [polytope_from_document(read_document(args.input))]
    else:
        n = _single_dim(args)
        count = args.cases if args.cases is not None else 10
        targets = [
            random_polytope(case_seed(args.seed, "crosscheck-target", i), n, n + 4, 1.0)
            for i in range(count)
        ]
    report = oracle_crosscheck(targets, samples, args.seed)
    write_document(report.to_dict(), args.out)
    return 0 if report.passed else 1


COMMANDS = {
    "moment": (cmd_moment, "Moment matrix M(P) of a polytope, or K(h) of a function document"),
    "psi": (cmd_psi, "Evaluate Psi(h) for a spec (--spec, optional --input, default h = 0)"),
    "verify": (cmd_verify, "Run the randomized property suite and write its report"),
    "extract": (cmd_extract, "Recover (xi, s) from a valuation (--spec, optional --input support)"),
    "approx": (cmd_approx, "Inner dyadic cube approximation of a polytope (--input, --delta)"),
    "probe-growth": (cmd_probe_growth, "Growth check and radial divergence probes of xi (--input)"),
    "crosscheck": (cmd_crosscheck, "Monte Carlo cross-check of exact moments"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="valuation-lab",
        description="SL(n)-covariant matrix-valued valuations on simple functions.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sub = subparsers.add_parser(name, help=help_text, description=help_text)
        sub.add_argument("--input", help="Input document path, '-' for standard input")
        sub.add_argument("--spec", help="Valuation spec document path")
        sub.add_argument(
            "--dim", type=int, action="append", help="Ambient dimension n (repeatable for verify)"
        )
        sub.add_argument("--p", type=float, help="Exponent p")
        sub.add_argument("--seed", type=int, default=0, help="Master seed (default 0)")
        sub.add_argument("--cases", type=int, help="Cases per property or number of targets")
        sub.add_argument("--tol", type=float, help="Tolerance override")
        sub.add_argument("--delta", type=float, help="Dyadic grid size")
        sub.add_argument("--samples", type=int, help="Monte Carlo samples per target")
        sub.add_argument(
            "--family", choices=FAMILIES, default="psi", help="Valuation family under test"
        )
        sub.add_argument(
            "--gamma", type=float, action="append", help="Radial decay rate (repeatable)"
        )
        sub.add_argument("--out", default="-", help="Output path, '-' for standard output")
        sub.add_argument(
            "-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG"
        )
    return parser


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(
        level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    handler = COMMANDS[args.command][0]
    try:
        return handler(args)
    except (ValuationLabError, OSError) as e:
        message = str(e).splitlines()[0] if str(e) else e.__class__.__name__
        print(f"valuation-lab {args.command}: error: {message}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
