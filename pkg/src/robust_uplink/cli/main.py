"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 verification failure (oracle
mismatch or a violated ordering in sweep output), 3 I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

from .. import __version__
from ..errors import ConfigError, DomainError
from . import cache
from .config import PRESETS, SweepSpec, load_config, load_preset
from .output import emit_svg, format_csv, parse_csv, read_csv
from .sweep import check_rows, run_point, run_sweep
from .verify import LEVELS, run_verify

__all__ = ["main", "build_parser", "EXIT_OK", "EXIT_CONFIG", "EXIT_VERIFY", "EXIT_IO"]

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("robust_uplink")


class _Failure(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robust-uplink", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-q", "--quiet", action="store_true", help="only log warnings and errors")
    sub = parser.add_subparsers(dest="command", required=True)

    def sweep_args(p, with_svg=True):
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--config", help="configuration file")
        src.add_argument("--preset", choices=sorted(PRESETS), help="built-in sweep configuration")
        p.add_argument("--out", help="CSV output path (default: stdout)")
        if with_svg:
            p.add_argument("--svg", help="also write an SVG chart here")
        p.add_argument("--seed", type=_u64, help="override the configured seed")
        p.add_argument("--samples", type=_positive, help="fading draws per point")
        p.add_argument("--jobs", type=_positive, default=1, help="worker processes")
        p.add_argument("--no-cache", action="store_true", help="neither read nor write the result cache")
        p.add_argument("--budget", type=_positive, help="optimizer evaluations per curve and point")
        p.add_argument("--timing", action="store_true", help="fill the ms column (disables the cache)")

    sweep_args(sub.add_parser("nf-sweep", help="non-fading throughput curves"))
    sweep_args(sub.add_parser("fading-sweep", help="fading throughput curves"))
    sweep_args(sub.add_parser("upper-bound", help="non-fading upper bound only"))
    opt = sub.add_parser("optimize", help="optimize every curve of a configuration at one point")
    sweep_args(opt)
    opt.add_argument("--at", type=float, help="value of the swept parameter (default: its [system] value)")

    ver = sub.add_parser("verify", help="compare closed forms with the mutual-information oracle")
    ver.add_argument("--level", choices=LEVELS, default="quick")
    ver.add_argument("--seed", type=_u64, default=0)
    ver.add_argument("--out", help="write the JSON report here")
    ver.add_argument("--perturb", type=float, default=0.0, help=argparse.SUPPRESS)

    plot = sub.add_parser("plot", help="render a result CSV as SVG")
    plot.add_argument("csv", help="CSV produced by a sweep")
    plot.add_argument("--svg", required=True, help="output path")
    plot.add_argument("--title")
    return parser


def _load_spec(args) -> SweepSpec:
    try:
        spec = load_preset(args.preset) if args.preset else load_config(args.config)
    except OSError as exc:
        raise _Failure(EXIT_IO, f"cannot read configuration: {exc}") from None
    except ConfigError as exc:
        where = f"{args.config}: " if args.config else ""
        raise _Failure(EXIT_CONFIG, f"{where}{exc}") from None
    try:
        return spec.with_overrides(seed=args.seed, samples=args.samples, budget=args.budget)
    except ConfigError as exc:
        raise _Failure(EXIT_CONFIG, str(exc)) from None


def _check_scenario(spec: SweepSpec, command: str) -> SweepSpec:
    want = "fading" if command == "fading-sweep" else "nonfading"
    if command in ("nf-sweep", "fading-sweep", "upper-bound") and spec.scenario != want:
        raise _Failure(EXIT_CONFIG, f"{command} needs scenario = {want}, the configuration has {spec.scenario}")
    if command == "upper-bound":
        spec = replace(spec, modes=("upper",))
    return spec


def _write(path, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise _Failure(EXIT_IO, f"cannot write {path}: {exc}") from None


def _sweep(args) -> int:
    spec = _check_scenario(_load_spec(args), args.command)
    if args.command == "optimize":
        value = args.at if args.at is not None else spec.params_value()
        try:
            rows = run_point(spec, value)
        except (DomainError, ConfigError) as exc:
            raise _Failure(EXIT_CONFIG, str(exc)) from None
        text = format_csv(rows)
    else:
        use_cache = not (args.no_cache or args.timing)
        key = cache.spec_key(spec.canonical())
        text = cache.lookup(key) if use_cache else None
        if text is not None:
            log.info("served from cache (%s)", key[:16])
            rows = parse_csv(text)
        else:
            rows = run_sweep(spec, jobs=args.jobs, timing=args.timing)
            text = format_csv(rows)
            if use_cache:
                try:
                    cache.store(key, text)
                except OSError as exc:
                    log.warning("could not store cache entry: %s", exc)
    problems = check_rows(rows)
    if problems:
        for p in problems:
            log.error("ordering violated %s", p)
        raise _Failure(EXIT_VERIFY, f"{len(problems)} ordering violations; output withheld")
    _write(args.out, text)
    if getattr(args, "svg", None):
        try:
            emit_svg(rows, args.svg)
        except OSError as exc:
            raise _Failure(EXIT_IO, f"cannot write {args.svg}: {exc}") from None
    return EXIT_OK


def _verify(args) -> int:
    result = run_verify(args.level, perturb=args.perturb, seed=args.seed)
    print(result.summary())
    for g in result.groups:
        for f in g.failures[:3]:
            log.error("%s: %s deviates by %.3g (tolerance %.3g) at %s",
                      g.name, f["check"], f["deviation"], f["tolerance"], f["context"])
    if args.out:
        _write(args.out, json.dumps(result.to_dict(), indent=2, default=float) + "\n")
    return result.exit_code


def _plot(args) -> int:
    try:
        rows = read_csv(args.csv)
    except OSError as exc:
        raise _Failure(EXIT_IO, f"cannot read {args.csv}: {exc}") from None
    except ValueError as exc:
        raise _Failure(EXIT_CONFIG, f"{args.csv}: {exc}") from None
    try:
        emit_svg(rows, args.svg, title=args.title)
    except OSError as exc:
        raise _Failure(EXIT_IO, f"cannot write {args.svg}: {exc}") from None
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage; that code is reserved here
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s: %(message)s", force=True
    )
    handlers = {"verify": _verify, "plot": _plot}
    try:
        return handlers.get(args.command, _sweep)(args)
    except _Failure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
