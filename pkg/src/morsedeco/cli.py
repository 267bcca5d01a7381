"""Command-line entry point: ``morsedeco run|sweep|calibrate``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import config as config_mod
from .bath import EnvironmentSpec, build_dissipator, calibrate_lambda, ground_rate, largest_rates
from .errors import DomainError, NumericalAbort
from .morse import NO_MOLECULE_S, small_oscillation_period

OUT_DIR_ENV = "MORSEDECO_OUT_DIR"
EXIT_SCHEMA = 2
EXIT_PHYSICS = 3
EXIT_ABORT = 4


def _positive(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def build_parser():
    p = argparse.ArgumentParser(prog="morsedeco",
                                description="Decoherence of Morse-oscillator wave packets "
                                            "in a thermal bath.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", help="scenario JSON file or the name of a bundled config")
        sp.add_argument("--out-dir", default=None,
                        help=f"output root (default ${OUT_DIR_ENV} or ./runs)")
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--level", choices=["full", "secular", "pauli"], default=None)

    common(sub.add_parser("run", help="integrate one scenario"))
    common(sub.add_parser("sweep", help="decoherence time over a parameter grid"))

    cal = sub.add_parser("calibrate", help="coupling constant for a given omega01/gamma01")
    cal.add_argument("--ratio", type=_positive, required=True)
    cal.add_argument("--s", type=_positive, default=NO_MOLECULE_S)
    cal.add_argument("--temperature", type=float, default=0.0,
                     help="bath temperature for the rate table (units of hbar omega01/k)")
    cal.add_argument("--json", action="store_true", help="print JSON instead of a table")
    sub.add_parser("list-configs", help="show bundled scenario names")
    return p


def _resolve_config(arg):
    path = Path(arg)
    if path.exists():
        return path
    bundled = config_mod.bundled_path(arg)
    if bundled.is_file():
        return bundled
    raise FileNotFoundError(arg)


def _load(args):
    cfg = config_mod.load(_resolve_config(args.config))
    if args.level:
        cfg["level"] = args.level
    root = Path(args.out_dir or os.environ.get(OUT_DIR_ENV) or "runs")
    return cfg, root / cfg["name"]


def cmd_run(args):
    from .runner import run_scenario
    cfg, out = _load(args)
    man = run_scenario(cfg, out)
    print(f"wrote {len(man['outputs'])} files to {out}")
    return 0


def cmd_sweep(args):
    from .runner import run_sweep
    cfg, out = _load(args)
    man = run_sweep(cfg, out, threads=max(1, args.threads))
    print(f"wrote {len(man['outputs'])} files to {out}")
    law = out / "law.json"
    if law.exists():
        print(law.read_text().strip())
    return 0


def cmd_calibrate(args):
    from .runner import get_model
    model = get_model(args.s)
    lam = calibrate_lambda(model, args.ratio)
    env = EnvironmentSpec.for_model(model, args.temperature, lam)
    rates = largest_rates(build_dissipator(model, env), 10)
    g01 = ground_rate(model, lam)
    info = {
        "ratio": args.ratio, "lambda": lam, "gamma01_T0": g01, "omega01": model.omega01,
        "omega01_over_gamma01": model.omega01 / g01,
        "t0": small_oscillation_period(model.s, "orbital"),
        "temperature": args.temperature,
        "largest_rates": [{"rate": r, "from": k, "to": i} for r, k, i in rates],
    }
    if args.json:
        print(json.dumps(info, indent=2))
        return 0
    for key in ("lambda", "gamma01_T0", "omega01", "omega01_over_gamma01", "t0"):
        print(f"{key:>22s}  {info[key]:.10g}")
    print(f"\n  largest rates at T = {args.temperature:g}")
    print(f"  {'from':>4s} {'to':>4s}  {'rate':>14s}")
    for r in info["largest_rates"]:
        print(f"  {r['from']:4d} {r['to']:4d}  {r['rate']:14.6e}")
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "list-configs":
        print("\n".join(config_mod.bundled_configs()))
        return 0
    handler = {"run": cmd_run, "sweep": cmd_sweep, "calibrate": cmd_calibrate}[args.command]
    try:
        return handler(args)
    except config_mod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except FileNotFoundError as exc:
        print(f"no such config: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except DomainError as exc:
        print(f"precondition failed: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}; last good t = {exc.last_good_time:.8g}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
