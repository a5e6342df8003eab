"""``psdocalc`` command line.

Exit codes: 0 pass, 1 fail, 2 configuration or parse error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..covariant_reduction import expand_covariant, reduce_mod_relations
from ..derivations import DerivationCase, StageError, run_case
from ..moyal_numeric import run_moyal_suite
from ..term_algebra import under_integral
from .config import FORMATS, ConfigError, RunConfig, load_config
from .grammar import ParseError, format_expression, parse_expression
from .report import render

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits 2 already; keep the message short
        self.print_usage(sys.stderr)
        raise SystemExit(f"psdocalc: error: {message}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="psdocalc", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file with RunConfig fields")
    sub = parser.add_subparsers(dest="command", required=True)

    derive = sub.add_parser("derive", help="run a derivation pipeline")
    derive.add_argument("case", choices=[c.value for c in DerivationCase])
    derive.add_argument("--order", type=int, help="resolvent cutoff n_max (heat kernel: table depth)")
    derive.add_argument("--r-max", dest="r_max", type=int)
    derive.add_argument("--compose-order", dest="compose_order", type=int)
    derive.add_argument("--regime", choices=["commutative", "moyal"])
    derive.add_argument("--report", help="write the report here instead of stdout")
    derive.add_argument("--format", choices=FORMATS)
    derive.add_argument("--threads", type=int)

    verify = sub.add_parser("verify-identity", help="check LHS = RHS modulo IBP and cyclicity")
    verify.add_argument("lhs")
    verify.add_argument("rhs")
    verify.add_argument("--regime", choices=["commutative", "moyal"])
    verify.add_argument("--abelian", action="store_true", help="also allow reordering of matrix factors")

    check = sub.add_parser("moyal-check", help="numeric star-product checks")
    check.add_argument("--grid", type=int)
    check.add_argument("--extent", type=float)
    check.add_argument("--theta", type=float)
    check.add_argument("--tol", type=float)
    return parser


def _config(args, **overrides) -> RunConfig:
    base = load_config(args.config) if args.config else RunConfig()
    return base.merged(**overrides).validate()


def _derive(args) -> int:
    cfg = _config(
        args,
        case=args.case,
        order=args.order,
        r_max=args.r_max,
        compose_order=args.compose_order,
        regime=args.regime,
        format=args.format,
        threads=args.threads,
    )
    try:
        report = run_case(cfg.case, cfg.pipeline())
    except StageError as exc:
        print(f"psdocalc: pipeline failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    text = render(report, cfg.as_dict(), cfg.format)
    if args.report:
        Path(args.report).write_text(text, encoding="utf-8")
        print(f"{report.case.value}: {report.verdict} ({report.coefficient})")
    else:
        sys.stdout.write(text)
    return EXIT_PASS if report.passed else EXIT_FAIL


def _verify(args) -> int:
    cfg = _config(args, regime=args.regime)
    regime = cfg.regime or "commutative"
    lhs = under_integral(expand_covariant(parse_expression(args.lhs, regime)))
    rhs = under_integral(expand_covariant(parse_expression(args.rhs, regime)))
    dims = {m.dimension() for e in (lhs, rhs) for m, _ in e.items()}
    if len(dims) > 1:
        raise ConfigError(f"sides have different mass dimensions {sorted(dims)}")
    diff = reduce_mod_relations(lhs - rhs, args.abelian, cfg.max_dimension)
    if diff.is_zero:
        print("equal")
        return EXIT_PASS
    print("not equal; canonical difference:")
    print(format_expression(diff.as_expression()))
    return EXIT_FAIL


def _moyal(args) -> int:
    cfg = _config(args, grid=args.grid, extent=args.extent, theta=args.theta, tol=args.tol)
    results = run_moyal_suite(cfg.grid, cfg.extent, cfg.theta, cfg.tol)
    rows = [{"name": r.name, "value": r.value, "tolerance": r.tolerance, "passed": bool(r.passed)} for r in results]
    print(json.dumps({"config": cfg.as_dict(), "checks": rows}, indent=2, sort_keys=True))
    return EXIT_PASS if all(r.passed for r in results) else EXIT_FAIL


COMMANDS = {"derive": _derive, "verify-identity": _verify, "moyal-check": _moyal}


def main(argv: list | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code not in (0, None) and not isinstance(exc.code, int):
            print(exc.code, file=sys.stderr)
            return EXIT_USAGE
        return EXIT_USAGE if exc.code else EXIT_PASS
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ParseError, ValueError) as exc:
        print(f"psdocalc: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
