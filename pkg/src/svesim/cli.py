"""Command-line front end: ``svesim run | diff | check``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .asm import assemble
from .errors import AssemblyError, ExecutionError
from .harness import ConfigError, RunConfig, diff, parse_int, run_program

EXIT_CODES = {"returned": 0, "faulted": 1, "limit_exceeded": 3}
EXIT_CONFIG = 2
EXIT_DIVERGED = 4


def _map_arg(text: str):
    addr, sep, length = text.partition(":")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected addr:len, got {text!r}")
    return parse_int(addr), parse_int(length)


def _data_arg(text: str):
    addr, sep, payload = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected addr=hex or addr=@file, got {text!r}")
    if payload.startswith("@"):
        try:
            data = Path(payload[1:]).read_bytes()
        except OSError as e:
            raise argparse.ArgumentTypeError(str(e)) from None
    else:
        try:
            data = bytes.fromhex(payload)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad hex bytes in {text!r}") from None
    return parse_int(addr), data


def _reg_arg(text: str):
    name, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected xN=value, got {text!r}")
    return name.strip().lower(), parse_int(value)


def _vl_list(text: str):
    return [int(v) for v in text.split(",") if v.strip()]


def _add_shared(p: argparse.ArgumentParser):
    p.add_argument("--entry", help="label to start execution at (default: first instruction)")
    p.add_argument("--max-steps", type=int, default=1_000_000)
    p.add_argument("--trace", action="store_true", help="record a per-step trace")
    p.add_argument("--json", action="store_true", help="emit a machine-readable JSON report")
    p.add_argument("--map", action="append", type=_map_arg, default=[], metavar="ADDR:LEN")
    p.add_argument("--data", action="append", type=_data_arg, default=[], metavar="ADDR=HEX|@FILE")
    p.add_argument("--reg", action="append", type=_reg_arg, default=[], metavar="xN=V")
    p.add_argument("--observe", help="comma-separated registers and mem:ADDR:LEN windows")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="svesim", description="Scalable-vector functional simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="assemble and run at one vector length")
    run.add_argument("source")
    run.add_argument("--vl", type=int, required=True)
    run.add_argument("--effective-vl", type=int)
    _add_shared(run)

    d = sub.add_parser("diff", help="run at several vector lengths and compare observable state")
    d.add_argument("source")
    d.add_argument("--vls", type=_vl_list, required=True)
    _add_shared(d)

    check = sub.add_parser("check", help="assemble only and report diagnostics")
    check.add_argument("source")
    return parser


def _config(args, vl: int, effective_vl=None) -> RunConfig:
    return RunConfig(
        vl=vl,
        effective_vl=effective_vl,
        entry=args.entry,
        max_steps=args.max_steps,
        trace=args.trace,
        maps=list(args.map),
        data=list(args.data),
        regs=dict(args.reg),
        observe=[o.strip() for o in args.observe.split(",") if o.strip()] if args.observe else None,
    )


def _assemble_file(path: str):
    source = Path(path).read_text(encoding="utf-8")
    return assemble(source)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = sys.stdout
    try:
        program = _assemble_file(args.source)
    except AssemblyError as e:
        for d in e.diagnostics:
            print(f"{args.source}:{d}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"svesim: {e}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "check":
        print(f"{args.source}: ok ({len(program.instructions)} instructions)", file=out)
        return 0

    try:
        if args.command == "run":
            report = run_program(program, _config(args, args.vl, args.effective_vl))
            out.write(report.to_json() if args.json else report.to_text())
            return EXIT_CODES[report.status]
        result = diff(program, args.vls, _config(args, args.vls[0] if args.vls else 128))
    except (ConfigError, ExecutionError) as e:
        print(f"svesim: {e}", file=sys.stderr)
        return EXIT_CONFIG

    if args.json:
        doc = {
            "identical": result.identical,
            "divergence": result.divergence,
            "runs": {str(vl): result.reports[vl].to_dict() for vl in result.vls},
        }
        out.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    else:
        out.write(result.to_text())
    return 0 if result.identical else EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
