"""Sweep configuration: ``key = value`` text with ``[section]`` headers.

Three sections are recognized. ``[system]`` holds the base operating point,
``[sweep]`` the swept parameter and its grid, ``[run]`` the scenario, curves
and numerical settings. Unknown sections and keys are rejected, and every
error names the offending line and field.

Example::

    [system]
    P_db = 10
    alpha = 0.3
    C = 1
    dC = 0.5
    p = 0.1

    [sweep]
    param = p
    from = 0
    to = 1
    steps = 21

    [run]
    scenario = nonfading
    schemes = one-layer, five-layer
    modes = separate, joint, upper
"""
from __future__ import annotations

import configparser
import json
import math
import re
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..fading import DECODING_MODES
from ..model import SystemParams
from ..nonfading import MODES
from ..numerics import SCHEMES

__all__ = [
    "SweepSpec",
    "SWEPT_PARAMS",
    "FADING_SCHEMES",
    "DEFAULT_SAMPLES",
    "DEFAULT_BUDGET",
    "PRESETS",
    "parse_config",
    "load_config",
    "load_preset",
    "db_to_linear",
]

SWEPT_PARAMS = ("p", "alpha", "C", "dC", "P_db")
FADING_SCHEMES = {"one-layer": 1, "two-layer": 2}
_FADING_ALIASES = {"1": "one-layer", "2": "two-layer"}
NONFADING_MODES = MODES + ("upper",)
DEFAULT_SAMPLES = 20_000
DEFAULT_BUDGET = {"nonfading": 4000, "fading": 500}

_SYSTEM_KEYS = {"P_db", "alpha", "C", "dC", "p"}
_SWEEP_KEYS = {"param", "from", "to", "steps"}
_RUN_KEYS = {"scenario", "schemes", "modes", "mc_samples", "seed", "budget"}
_SCHEMA = {"system": _SYSTEM_KEYS, "sweep": _SWEEP_KEYS, "run": _RUN_KEYS}
_REQUIRED = {"system": _SYSTEM_KEYS, "sweep": _SWEEP_KEYS, "run": {"scenario"}}


def db_to_linear(db: float) -> float:
    return float(10.0 ** (db / 10.0))


@dataclass(frozen=True)
class SweepSpec:
    """A one-parameter sweep of optimized throughput curves.

    The five system fields give the base operating point; the swept one takes
    ``steps`` evenly spaced values from ``start`` to ``stop`` instead. Power is
    kept in dB here (``power_db``) and converted at :meth:`params_at`.
    """

    power_db: float
    alpha: float
    cap_low: float
    cap_delta: float
    p_low: float
    param: str
    start: float
    stop: float
    steps: int
    scenario: str
    schemes: tuple[str, ...]
    modes: tuple[str, ...]
    mc_samples: int = DEFAULT_SAMPLES
    seed: int = 0
    budget: int | None = None
    sources: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        _validate(self)

    @property
    def effective_budget(self) -> int:
        return int(self.budget if self.budget is not None else DEFAULT_BUDGET[self.scenario])

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.steps)

    def _fields(self) -> dict:
        return {"P_db": self.power_db, "alpha": self.alpha, "C": self.cap_low, "dC": self.cap_delta, "p": self.p_low}

    def params_value(self) -> float:
        """The ``[system]`` value of the swept parameter."""
        return self._fields()[self.param]

    def params_at(self, value: float) -> SystemParams:
        fields = self._fields()
        fields[self.param] = float(value)
        return SystemParams(
            power=db_to_linear(fields["P_db"]),
            alpha=fields["alpha"],
            cap_low=fields["C"],
            cap_delta=fields["dC"],
            p_low=fields["p"],
        )

    def with_overrides(self, *, seed=None, samples=None, budget=None) -> "SweepSpec":
        changes = {}
        if seed is not None:
            changes["seed"] = int(seed)
        if samples is not None:
            changes["mc_samples"] = int(samples)
        if budget is not None:
            changes["budget"] = int(budget)
        return replace(self, **changes) if changes else self

    def canonical(self) -> str:
        """Stable JSON text identifying the sweep's numerical content."""
        data = asdict(self)
        data.pop("sources")
        data["budget"] = self.effective_budget
        if self.scenario == "nonfading":
            # sampling settings do not affect non-fading results
            data.pop("mc_samples")
            data.pop("seed")
        return json.dumps(data, sort_keys=True, separators=(",", ":"))


def _fail(spec: SweepSpec, key: str, message: str):
    line = spec.sources.get(key)
    raise ConfigError(message, line=line, field=key)


def _validate(spec: SweepSpec) -> None:
    for key, value in (
        ("P_db", spec.power_db), ("alpha", spec.alpha), ("C", spec.cap_low), ("dC", spec.cap_delta),
        ("p", spec.p_low), ("from", spec.start), ("to", spec.stop),
    ):
        if not math.isfinite(value):
            _fail(spec, key, f"{key} must be finite")
    if spec.param not in SWEPT_PARAMS:
        _fail(spec, "param", f"swept parameter must be one of {', '.join(SWEPT_PARAMS)}, got {spec.param!r}")
    if spec.steps < 2:
        _fail(spec, "steps", f"steps must be >= 2, got {spec.steps}")
    domains = {"p": (0.0, 1.0), "alpha": (0.0, 1.0), "C": (0.0, math.inf), "dC": (0.0, math.inf)}
    fixed = {"alpha": spec.alpha, "C": spec.cap_low, "dC": spec.cap_delta, "p": spec.p_low}
    for key, (lo, hi) in domains.items():
        if key != spec.param and not lo <= fixed[key] <= hi:
            _fail(spec, key, f"{key} = {fixed[key]} lies outside [{lo}, {hi}]")
    if spec.param in domains:
        lo, hi = domains[spec.param]
        for key, value in (("from", spec.start), ("to", spec.stop)):
            if not lo <= value <= hi:
                _fail(spec, key, f"sweep of {spec.param} leaves its domain [{lo}, {hi}] at {value}")
    if spec.scenario == "nonfading":
        known_schemes, known_modes = tuple(SCHEMES), NONFADING_MODES
    elif spec.scenario == "fading":
        known_schemes, known_modes = tuple(FADING_SCHEMES), DECODING_MODES
    else:
        _fail(spec, "scenario", f"scenario must be 'nonfading' or 'fading', got {spec.scenario!r}")
    for key, items, known in (("schemes", spec.schemes, known_schemes), ("modes", spec.modes, known_modes)):
        if not items:
            _fail(spec, key, f"{key} must not be empty")
        bad = [x for x in items if x not in known]
        if bad:
            _fail(spec, key, f"unknown {key} {bad} for scenario {spec.scenario} (expected {', '.join(known)})")
        if len(set(items)) != len(items):
            _fail(spec, key, f"duplicate entries in {key}")
    if spec.mc_samples < 1:
        _fail(spec, "mc_samples", "mc_samples must be >= 1")
    if spec.seed < 0 or spec.seed >= 2**64:
        _fail(spec, "seed", "seed must be an unsigned 64-bit integer")
    if spec.budget is not None and spec.budget < 1:
        _fail(spec, "budget", "budget must be >= 1")


_LINE = re.compile(r"^\s*([^=:\s][^=:]*?)\s*[=:]")
_SECTION = re.compile(r"^\s*\[([^\]]+)\]")


def _key_lines(text: str) -> dict:
    """Map ``(section, key)`` to its 1-based line number."""
    lines, section = {}, None
    for number, raw in enumerate(text.splitlines(), start=1):
        m = _SECTION.match(raw)
        if m:
            section = m.group(1).strip()
            lines.setdefault((section, None), number)
            continue
        m = _LINE.match(raw)
        if m and section is not None and not raw.lstrip().startswith(("#", ";")):
            lines.setdefault((section, m.group(1)), number)
    return lines


def _number(raw: str, key: str, line, kind=float):
    try:
        value = kind(raw)
    except ValueError:
        raise ConfigError(f"{key} must be {'an integer' if kind is int else 'a number'}, got {raw!r}", line=line, field=key) from None
    return value


def _names(raw: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in raw.split(",") if x.strip())


def parse_config(text: str) -> SweepSpec:
    """Parse and validate configuration text."""
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#", ";"), default_section="\x00unused"
    )
    parser.optionxform = str  # keys are case-sensitive (C vs c)
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("content before the first [section] header", line=exc.lineno) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError(str(exc).split(": ", 1)[-1], line=exc.lineno, field=getattr(exc, "option", None)) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError("malformed line (expected 'key = value')", line=line) from None
    lines = _key_lines(text)

    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]", line=lines.get((section, None)))
        for key in parser[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(
                    f"unknown key in [{section}] (allowed: {', '.join(sorted(_SCHEMA[section]))})",
                    line=lines.get((section, key)), field=key,
                )
    for section, required in _REQUIRED.items():
        if section not in parser:
            raise ConfigError(f"missing section [{section}]", field=section)
        missing = sorted(required - set(parser[section]))
        if missing:
            raise ConfigError(
                f"missing key in [{section}]", line=lines.get((section, None)), field=missing[0]
            )

    def get(section, key, kind=float, default=None):
        if key not in parser[section]:
            return default
        return _number(parser[section][key], key, lines.get((section, key)), kind)

    run = parser["run"]
    scenario = run["scenario"].strip()
    if "schemes" in run:
        schemes = _names(run["schemes"])
        if scenario == "fading":
            schemes = tuple(_FADING_ALIASES.get(s, s) for s in schemes)
    else:
        schemes = tuple(FADING_SCHEMES) if scenario == "fading" else tuple(SCHEMES)
    if "modes" in run:
        modes = _names(run["modes"])
    else:
        modes = DECODING_MODES if scenario == "fading" else NONFADING_MODES
    sources = {key: lines.get((sec, key)) for sec in _SCHEMA for key in _SCHEMA[sec] if (sec, key) in lines}
    return SweepSpec(
        power_db=get("system", "P_db"),
        alpha=get("system", "alpha"),
        cap_low=get("system", "C"),
        cap_delta=get("system", "dC"),
        p_low=get("system", "p"),
        param=parser["sweep"]["param"].strip(),
        start=get("sweep", "from"),
        stop=get("sweep", "to"),
        steps=get("sweep", "steps", int),
        scenario=scenario,
        schemes=schemes,
        modes=modes,
        mc_samples=get("run", "mc_samples", int, DEFAULT_SAMPLES),
        seed=get("run", "seed", int, 0),
        budget=get("run", "budget", int, None),
        sources=sources,
    )


def load_config(path) -> SweepSpec:
    """Read and parse a configuration file; ``OSError`` propagates."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        return parse_config(text)
    except ConfigError as exc:
        exc.path = str(path)
        raise


_NF_RUN = """
[run]
scenario = nonfading
schemes = one-layer, scheme1, scheme2, three-layer, five-layer
modes = separate, joint, upper
"""
_FADING_RUN = """
[run]
scenario = fading
schemes = one-layer, two-layer
modes = common, individual
"""

PRESETS = {
    "fig3": """
[system]
P_db = 10
alpha = 0.3
C = 1
dC = 0.5
p = 0
[sweep]
param = p
from = 0
to = 1
steps = 21
""" + _NF_RUN,
    "fig4": """
[system]
P_db = 10
alpha = 0
C = 1
dC = 0.5
p = 0.1
[sweep]
param = alpha
from = 0
to = 1
steps = 21
""" + _NF_RUN,
    "fig5": """
[system]
P_db = 10
alpha = 0.3
C = 1
dC = 0
p = 0.05
[sweep]
param = dC
from = 0
to = 4
steps = 17
""" + _NF_RUN,
    "fig6": """
[system]
P_db = 30
alpha = 0.3
C = 4
dC = 6
p = 0
[sweep]
param = p
from = 0
to = 1
steps = 11
""" + _FADING_RUN,
    "fig7": """
[system]
P_db = 30
alpha = 0.2
C = 1
dC = 0
p = 0.5
[sweep]
param = C
from = 1
to = 10
steps = 10
""" + _FADING_RUN,
    "fig8": """
[system]
P_db = 30
alpha = 0.3
C = 4
dC = 0
p = 0.2
[sweep]
param = dC
from = 0
to = 10
steps = 11
""" + _FADING_RUN,
}


def load_preset(name: str) -> SweepSpec:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r} (available: {', '.join(PRESETS)})", field="preset")
    return parse_config(PRESETS[name])
