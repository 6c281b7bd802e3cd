"""Command-line front end: analyze, sweep, and verify subcommands.

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 verification
failure. Sweeps never abort on per-point numerical problems; those rows are
flagged in the CSV instead.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import sweep as sweep_mod
from . import verify as verify_mod
from .errors import ConfigError, EtaqfiError


def _load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _stem(path: str) -> str:
    base = os.path.basename(path)
    return base[:-5] if base.endswith(".json") else base


def _cmd_analyze(args) -> int:
    cfg = sweep_mod.parse_config(_load_config(args.config), "analyze")
    report = sweep_mod.run_analyze(cfg)
    sys.stdout.write(_json_text(report))
    if args.out is not None or cfg.outputs[1] is not None:
        out_dir = args.out or "."
        os.makedirs(out_dir, exist_ok=True)
        name = cfg.outputs[1] or f"{_stem(args.config)}_report.json"
        _write_text(os.path.join(out_dir, name), _json_text(report))
    return 0


def _cmd_sweep(args) -> int:
    if bool(args.config) == bool(args.preset):
        raise ConfigError("sweep needs a config file or --preset (exactly one)")
    if args.preset:
        cfg = sweep_mod.preset_config(args.preset)
        stem = args.preset
    else:
        cfg = sweep_mod.parse_config(_load_config(args.config), "sweep")
        stem = _stem(args.config)
    result = sweep_mod.run_sweep(cfg, workers=max(1, args.workers))

    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, cfg.outputs[0] or f"{stem}.csv")
    report_path = os.path.join(out_dir, cfg.outputs[1] or f"{stem}_report.json")
    _write_text(csv_path, result.csv_text)
    _write_text(report_path, _json_text(result.report))

    print(f"wrote {csv_path} ({len(result.samples)} rows)")
    print(f"wrote {report_path}")
    failed = result.report["summary"]["failed_points"]
    if failed:
        print(f"{failed} point(s) failed and carry the {sweep_mod.FLAG_EVAL_FAILED} flag")
    return 0


def _cmd_verify(args) -> int:
    failures = verify_mod.run("full" if args.full else "fast", seed=args.seed)
    return 4 if failures else 0


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--out", metavar="DIR", default=None, help="output directory (default: current)")
    sp.add_argument("--workers", metavar="N", type=int, default=1, help="parallel sweep workers")
    sp.add_argument(
        "--seed", metavar="N", type=int, default=0,
        help="seed for randomized verification fixtures",
    )


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="etaqfi",
        description="Fisher information for parameterized pseudo-Hermitian Hamiltonians",
    )
    sub = p.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="single-theta job from a JSON config")
    pa.add_argument("config", help="JSON config with a 'theta' field")
    _add_common(pa)
    pa.set_defaults(func=_cmd_analyze)

    ps = sub.add_parser("sweep", help="theta-grid job producing CSV and a JSON report")
    ps.add_argument("config", nargs="?", help="JSON config with a theta grid")
    ps.add_argument("--preset", choices=sorted(sweep_mod.PRESETS), help="embedded job")
    _add_common(ps)
    ps.set_defaults(func=_cmd_sweep)

    pv = sub.add_parser("verify", help="run the self-check suite")
    pv.add_argument("--full", action="store_true", help="include slow checks and figure sweeps")
    _add_common(pv)
    pv.set_defaults(func=_cmd_verify)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (EtaqfiError, ValueError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
