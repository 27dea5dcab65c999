"""Command-line front end: ``fraclap run | certify | scan-tau | version``.

Exit status: 0 success, 1 failing cases or search limit reached, 2 bad
configuration or parameters outside the subcritical range.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .core import ConfigInvalid, FraclapError, InvalidParams, MMaxExceeded, Params, Variant, to_fraction

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _cmd_run(args) -> int:
    from .suites import parse_config, run_suite

    text = Path(args.config).read_text(encoding="utf-8") if args.config else ""
    cfg = parse_config(text, suite=args.suite, seed=args.seed, output=args.output, trace=args.trace)
    report = run_suite(cfg)
    payload = report.to_json()
    if cfg.output:
        Path(cfg.output).write_text(payload, encoding="utf-8")
    else:
        sys.stdout.write(payload)
    if cfg.trace:
        base = Path(cfg.trace)
        base.mkdir(parents=True, exist_ok=True)
        for name, text in report.traces_csv().items():
            (base / f"{name}.csv").write_text(text, encoding="utf-8")
    return EXIT_OK if report.all_passed else EXIT_FAIL


def _cmd_certify(args) -> int:
    from .bootstrap import liouville_certificate

    params = Params(int(args.n), to_fraction(args.alpha), to_fraction(args.p), Variant.parse(args.variant))
    cert = liouville_certificate(params, m_max=args.m_max)
    sys.stdout.write(json.dumps(cert.to_dict(), sort_keys=True, indent=2) + "\n")
    return EXIT_OK


def _parse_range(text: str) -> list:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigInvalid(f"range must look like a0:a1:steps, got {text!r}")
    a0, a1 = to_fraction(parts[0]), to_fraction(parts[1])
    try:
        steps = int(parts[2])
    except ValueError as exc:
        raise ConfigInvalid(f"steps must be an integer, got {parts[2]!r}") from exc
    if steps < 1:
        raise ConfigInvalid("steps must be positive")
    if steps == 1:
        return [a0]
    return [a0 + (a1 - a0) * k / (steps - 1) for k in range(steps)]


def scan_tau_rows(alphas: Sequence[Fraction], p_count: int, variant: Variant, n: int, m_max: int) -> list:
    """(alpha, p, minimal m, tau, status) with p at p_count interior points of (1, tau_crit)."""
    from .bootstrap import minimal_m_for_tau, tau

    rows = []
    for a in alphas:
        if not 0 < a < 1:
            raise ConfigInvalid(f"alpha samples must lie in (0, 1), got {a}")
        crit = (n + a) / (n - a)
        for k in range(1, p_count + 1):
            p = 1 + (crit - 1) * Fraction(k, p_count + 1)
            try:
                m = minimal_m_for_tau(variant, p, a, m_max)
                t = tau(variant, p, a, m)
                rows.append([str(a), str(p), m, repr(float(t)), "ok"])
            except MMaxExceeded:
                rows.append([str(a), str(p), "", "", "MMaxExceeded"])
    return rows


def _cmd_scan(args) -> int:
    alphas = _parse_range(args.alpha)
    if args.p_count < 1:
        raise ConfigInvalid("p-count must be positive")
    rows = scan_tau_rows(alphas, args.p_count, Variant.parse(args.variant), args.n, args.m_max)
    out = open(args.output, "w", newline="", encoding="utf-8") if args.output else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["alpha", "p", "minimal_m", "tau", "status"])
        w.writerows(rows)
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_FAIL if any(r[-1] != "ok" for r in rows) else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fraclap", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a verification suite and emit a JSON report")
    run.add_argument("--suite", choices=("kernels", "operator", "kelvin", "bootstrap", "hls"))
    run.add_argument("--config", help="key=value configuration file")
    run.add_argument("--seed", type=int)
    run.add_argument("--output", help="write the JSON report here instead of stdout")
    run.add_argument("--trace", help="directory for CSV traces")
    run.set_defaults(func=_cmd_run)

    cert = sub.add_parser("certify", help="exact nonexistence certificate for (n, alpha, p)")
    cert.add_argument("n", type=int)
    cert.add_argument("alpha")
    cert.add_argument("p")
    cert.add_argument("variant")
    cert.add_argument("--m-max", type=int, default=10000)
    cert.set_defaults(func=_cmd_certify)

    scan = sub.add_parser("scan-tau", help="CSV of minimal m and tau over an (alpha, p) grid")
    scan.add_argument("--alpha", required=True, help="a0:a1:steps")
    scan.add_argument("--p-count", type=int, required=True)
    scan.add_argument("--variant", default="quadratic")
    scan.add_argument("--n", type=int, default=3)
    scan.add_argument("--m-max", type=int, default=10000)
    scan.add_argument("--output")
    scan.set_defaults(func=_cmd_scan)

    ver = sub.add_parser("version", help="print the package version")
    ver.set_defaults(func=lambda args: (print(__version__), EXIT_OK)[1])
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except MMaxExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (ConfigInvalid, InvalidParams, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FraclapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
