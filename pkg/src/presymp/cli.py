"""Command line: ``presymp verify`` and ``presymp thicken``.

Exit codes: 0 all checks pass, 1 a check failed, 2 input or usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .manifest import ManifestError, load_manifest
from .presymplectic import NotDarbouxError
from .serialize import format_embedding, format_form, format_report_jsonl, format_report_text
from .thickening import classical_thickening, cotangent_thickening, momentum_embedding
from .verify import FAIL, StageError, check_equivalence, full_report

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _load(path: str):
    try:
        return load_manifest(path)
    except OSError as exc:
        raise _UsageError(f"cannot read manifest: {exc}") from None
    except ManifestError as exc:
        raise _UsageError(str(exc)) from None


class _UsageError(Exception):
    pass


def cmd_verify(args, out=None) -> int:
    out = out or sys.stdout
    manifest = _load(args.manifest)
    options = manifest.verify_options()
    if args.seed is not None:
        options["seed"] = args.seed
    if args.samples is not None:
        options["samples"] = args.samples
    try:
        report = full_report(manifest.model, manifest.connection, **options)
    except StageError as exc:
        raise _UsageError(f"construction failed at stage {exc.stage!r}: {exc.cause}") from None

    print(format_report_text(report), file=out)
    if args.report:
        Path(args.report).write_text(format_report_jsonl(report))

    failures = report.failures()
    if failures and all(r.name == "darboux-shape" for r in failures):
        raise _UsageError("thickening requires Darboux shape (omega = sum_j dx_j ^ dy_j)")
    return EXIT_OK if not failures else EXIT_FAIL


def cmd_thicken(args, out=None) -> int:
    out = out or sys.stdout
    manifest = _load(args.manifest)
    model, connection = manifest.model, manifest.connection
    try:
        model.require_darboux()
    except NotDarbouxError as exc:
        raise _UsageError(str(exc)) from None

    chunks = []
    built = {}
    if args.route in ("classical", "both"):
        built["classical"] = classical_thickening(connection, model)
    if args.route in ("cotangent", "both"):
        built["cotangent"] = cotangent_thickening(connection, model)
    for route, tm in built.items():
        chunks.append(f"# route: {route}\n# chart: {' '.join(tm.chart.names)}\n{format_form(tm.omega)}")
        if route == "cotangent":
            chunks.append("# embedding\n" + format_embedding(momentum_embedding(connection, model)))

    status = EXIT_OK
    if args.route == "both":
        record = check_equivalence(built["classical"], built["cotangent"], manifest.samples, manifest.seed)
        equivalent = record.status != FAIL
        chunks.append(f"equivalent: {'true' if equivalent else 'false'}")
        if not equivalent:
            status = EXIT_FAIL

    text = "\n".join(chunks) + "\n"
    if args.emit:
        Path(args.emit).write_text(text)
    else:
        out.write(text)
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="presymp",
        description="Symplectic thickening of pre-symplectic manifolds in Darboux coordinates.")
    sub = parser.add_subparsers(dest="command", required=True)

    verify = sub.add_parser("verify", help="run every check and print a report")
    verify.add_argument("manifest")
    verify.add_argument("--report", help="also write the newline-delimited JSON report here")
    verify.add_argument("--seed", type=int)
    verify.add_argument("--samples", type=int)
    verify.set_defaults(func=cmd_verify)

    thicken = sub.add_parser("thicken", help="print the coefficient table of the thickened form")
    thicken.add_argument("manifest")
    thicken.add_argument("--route", choices=("classical", "cotangent", "both"), default="both")
    thicken.add_argument("--emit", help="write to this file instead of standard output")
    thicken.set_defaults(func=cmd_thicken)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if getattr(args, "samples", None) is not None and args.samples < 1:
        print("presymp: error: --samples must be positive", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"presymp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
