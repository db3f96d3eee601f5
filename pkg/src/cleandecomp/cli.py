"""Command line front end.

Exit status: 0 success, 1 a check failed, 2 bad input.
"""

from __future__ import annotations

import argparse
import sys

from .clean import almost_star_clean, clean_decompose, verify_certificate
from .errors import CleanDecompError, InternalInvariantViolation
from .harness import CampaignConfig, run_campaign
from .kernel import DEFAULT_TOL, BlockOperator, ToleranceProfile
from .serialization import (
    FormatError,
    certificate_from_json,
    certificate_to_json,
    operator_from_json,
    pair_to_json,
    projection_from_json,
    read_json,
    write_json,
)
from .twoproj import decompose_pair

EXIT_OK, EXIT_CHECK_FAILED, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def _load_tol(path) -> ToleranceProfile:
    if path is None:
        return DEFAULT_TOL
    data = read_json(path)
    if not isinstance(data, dict):
        raise FormatError(f"{path}: tolerance profile must be an object")
    return ToleranceProfile.from_dict(data)


def _load_operator(path):
    return operator_from_json(read_json(path), where=str(path))


def cmd_decompose(args) -> int:
    tol = _load_tol(args.tol_profile)
    T = _load_operator(args.input)
    fn = clean_decompose if args.kind == "clean" else almost_star_clean
    try:
        cert = fn(T, tol)
    except InternalInvariantViolation as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    write_json(args.output, certificate_to_json(cert))
    print(f"{cert.kind}: inverse_norm = {cert.inverse_norm:.12g}"
          + ("" if cert.claimed_bound is None else f" (claimed bound {cert.claimed_bound:g})"))
    return EXIT_OK


def cmd_verify(args) -> int:
    tol = _load_tol(args.tol_profile)
    T = _load_operator(args.input)
    cert = certificate_from_json(read_json(args.cert), tol, where=str(args.cert))
    if isinstance(T, BlockOperator) and not hasattr(cert, "blocks"):
        T = T.dense()
    report = verify_certificate(T, cert, tol)
    for line in report.lines():
        print(line)
    if report.passed:
        print("certificate OK")
        return EXIT_OK
    print("certificate FAILED: " + ", ".join(report.failed))
    return EXIT_CHECK_FAILED


def cmd_halmos(args) -> int:
    tol = _load_tol(args.tol_profile)
    E = projection_from_json(read_json(args.e), tol, where=str(args.e))
    F = projection_from_json(read_json(args.f), tol, where=str(args.f))
    pair = decompose_pair(E, F, tol)
    write_json(args.output, pair_to_json(pair))
    ranks = (pair.meetEF.rank, pair.meetEFp.rank, pair.meetEpF.rank, pair.meetEpFp.rank, 2 * pair.generic_rank)
    print("ranks E^F, E^F', E'^F, E'^F', I0: " + ", ".join(map(str, ranks)))
    return EXIT_OK


def cmd_campaign(args) -> int:
    data = read_json(args.config) if args.config else {}
    if not isinstance(data, dict):
        raise FormatError(f"{args.config}: campaign config must be an object")
    try:
        config = CampaignConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{args.config}: {exc}") from exc
    report = run_campaign(config)
    write_json(args.report, report.to_dict(include_timing=args.timing))
    for line in report.lines():
        print(line)
    print(f"{report.instances} instances, {len(report.failures)} failure dumps, {report.wall_clock_s:.1f} s")
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cleandecomp", description="Certified clean decompositions of matrices.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="decompose T and write a certificate")
    p.add_argument("--input", required=True)
    p.add_argument("--kind", choices=("clean", "almost-star"), default="clean")
    p.add_argument("--output", required=True)
    p.add_argument("--tol-profile")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("verify", help="recheck a certificate against T")
    p.add_argument("--input", required=True)
    p.add_argument("--cert", required=True)
    p.add_argument("--tol-profile")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("halmos", help="two-projection decomposition of (E, F)")
    p.add_argument("--e", required=True)
    p.add_argument("--f", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--tol-profile")
    p.set_defaults(func=cmd_halmos)

    p = sub.add_parser("campaign", help="run the randomized property campaign")
    p.add_argument("--config")
    p.add_argument("--report", required=True)
    p.add_argument("--timing", action="store_true", help="include wall-clock time in the report file")
    p.set_defaults(func=cmd_campaign)
    return parser


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (CleanDecompError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
