"""Command-line entry point: ``ramanmem SUBCOMMAND [options]``.

Exit codes: 0 ok, 2 configuration error, 3 numerical error, 4 infeasible
calibration, 1 anything else. On failure a JSON object ``{"error", "message",
"exit_code", "subcommand"}`` is printed to stderr and written to
``<out>/error.json``.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

from .config import load_config
from .errors import RamanMemError
from .pipeline import PIPELINES
from .report import emit


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ramanmem",
                                description="Raman memory simulation, sweeps, bounds and checks.")
    p.add_argument("subcommand", choices=sorted(PIPELINES))
    p.add_argument("--config", metavar="PATH", help="INI file layered over the packaged defaults")
    p.add_argument("--set", dest="overrides", metavar="KEY=VALUE", action="append", default=[],
                   help="override one setting, e.g. --set pulse.write_energy_nJ=3 (repeatable)")
    p.add_argument("--out", metavar="DIR", help="output directory (default: [output] directory)")
    p.add_argument("--format", choices=("csv", "json"), help="artifact format (default: [output] format)")
    p.add_argument("--grid-scale", type=int, default=1, metavar="N",
                   help="multiply time and depth samples by N")
    return p


def _fail(exc: Exception, code: int, subcommand: str, out: Path | None) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code,
               "subcommand": subcommand}
    text = json.dumps(payload, sort_keys=True)
    print(text, file=sys.stderr)
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / "error.json").write_text(text + "\n")
        except OSError:
            pass
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out) if args.out else None
    try:
        cfg = load_config(args.config, args.overrides)
        if args.grid_scale != 1:
            cfg = cfg.scaled(args.grid_scale)
        out = out or Path(cfg.output_directory)
        fmt = args.format or cfg.output_format
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            report = PIPELINES[args.subcommand](cfg)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        out.mkdir(parents=True, exist_ok=True)
        for path in emit(report, fmt, out / f"{args.subcommand}.{fmt}"):
            print(path)
        if args.subcommand == "validate" and not report.results["all_passed"]:
            failed = [c["name"] for c in report.results["checks"] if not c["passed"]]
            print(json.dumps({"failed_checks": failed}), file=sys.stderr)
            return 3
        return 0
    except RamanMemError as exc:
        return _fail(exc, exc.exit_code, args.subcommand, out)
    except OSError as exc:
        return _fail(exc, 1, args.subcommand, out)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
