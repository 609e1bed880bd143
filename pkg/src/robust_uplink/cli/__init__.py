"""Batch front end: configuration, sweeps, verification, CSV/SVG output and caching."""
from .config import PRESETS, SweepSpec, load_config, load_preset, parse_config
from .output import emit_csv, emit_svg, format_csv, parse_csv, read_csv
from .sweep import ResultRow, check_rows, run_point, run_sweep
from .verify import run_verify

__all__ = [
    "PRESETS",
    "SweepSpec",
    "load_config",
    "load_preset",
    "parse_config",
    "emit_csv",
    "emit_svg",
    "format_csv",
    "parse_csv",
    "read_csv",
    "ResultRow",
    "check_rows",
    "run_point",
    "run_sweep",
    "run_verify",
]
