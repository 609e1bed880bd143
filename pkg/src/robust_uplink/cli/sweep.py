"""Parameter sweeps of optimized throughput curves.

A sweep runs in two passes over its points. The first optimizes every
(scheme, mode) curve at each point independently. The second pools the
strategies found anywhere in the sweep and rescores, at each point, every
pooled strategy that the curve's scheme can express, keeping the best. The
pool makes the orderings between curves hold exactly (a larger scheme or a
stronger decoder is never scored below a smaller one) and smooths out points
where the first pass got stuck. Both passes are pure functions of the configuration
and the point, so the result does not depend on how many worker processes
evaluate them.
"""
from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import DegenerateCapacityError
from ..fading import FadingRates, SampleSet, optimize_fading
from ..model import check_capacity
from ..nonfading import _batch_average, achievable_throughput, noises_for_mode, optimize_scheme, upper_bound
from ..numerics import SCHEMES
from .config import FADING_SCHEMES, SweepSpec

__all__ = ["ResultRow", "UPPER_SCHEME", "run_sweep", "run_point", "check_rows", "significant"]

log = logging.getLogger("robust_uplink")

UPPER_SCHEME = "upper-bound"
DIGITS = 12


def significant(x: float | None) -> float | None:
    """``x`` rounded to :data:`DIGITS` significant digits."""
    if x is None:
        return None
    return float(f"{float(x):.{DIGITS}g}")


@dataclass(frozen=True)
class ResultRow:
    """One point of one curve.

    ``throughput`` is ``None`` for a skipped point (degenerate capacities).
    Numbers are stored at the precision written to CSV, so a parsed file
    compares equal to the rows that produced it.
    """

    swept_param: str
    value: float
    scenario: str
    scheme: str
    mode: str
    throughput: float | None
    std_error: float | None = None
    lam: tuple = ()
    rates: tuple = ()
    ms: float | None = None

    def __post_init__(self):
        for name in ("value", "throughput", "std_error", "ms"):
            object.__setattr__(self, name, significant(getattr(self, name)))
        object.__setattr__(self, "lam", tuple(significant(x) for x in self.lam))
        object.__setattr__(self, "rates", tuple(significant(x) for x in self.rates))

    @property
    def skipped(self) -> bool:
        return self.throughput is None


@dataclass
class _Curve:
    value: float
    strategy: tuple  # non-fading: 5 weights; fading: (lambda2, r11, r21, r12, r22)
    std_error: float | None = None
    rates: tuple = ()
    ms: float = 0.0


@dataclass
class _Point:
    value: float
    skipped: str | None = None
    curves: dict = field(default_factory=dict)  # (scheme, mode) -> _Curve
    upper: _Curve | None = None


def _curve_keys(spec: SweepSpec) -> list[tuple[str, str]]:
    modes = [m for m in spec.modes if m != "upper"]
    return [(s, m) for s in spec.schemes for m in modes]


def _layers(scheme: str) -> int:
    return FADING_SCHEMES[scheme]


# ---------------------------------------------------------------- first pass


def _nonfading_point(spec: SweepSpec, value: float) -> _Point:
    params = spec.params_at(value)
    point = _Point(value)
    try:
        check_capacity(params)
    except DegenerateCapacityError as exc:
        point.skipped = str(exc)
        return point
    # smaller masks first, so each optimum can seed the schemes containing it
    order = sorted(spec.schemes, key=lambda s: (len(SCHEMES[s].layers), spec.schemes.index(s)))
    for mode in [m for m in spec.modes if m != "upper"]:
        found = {}
        for scheme in order:
            seeds = [found[s] for s in found if SCHEMES[s] <= SCHEMES[scheme]]
            t0 = time.perf_counter()
            rep = optimize_scheme(params, mode, scheme, spec.effective_budget, initial=seeds)
            found[scheme] = rep.lambda_
            point.curves[(scheme, mode)] = _Curve(
                rep.average, tuple(rep.lambda_), None, tuple(rep.rates.as_list()), _ms(t0)
            )
    if "upper" in spec.modes:
        t0 = time.perf_counter()
        point.upper = _Curve(upper_bound(params), (), ms=_ms(t0))
    return point


def _fading_point(spec: SweepSpec, value: float) -> _Point:
    params = spec.params_at(value)
    point = _Point(value)
    try:
        check_capacity(params)
    except DegenerateCapacityError as exc:
        point.skipped = str(exc)
        return point
    samples = SampleSet(params, spec.mc_samples, spec.seed)
    budget = spec.effective_budget
    for mode in spec.modes:
        t0 = time.perf_counter()
        one = optimize_fading(params, mode, 1, budget=budget, samples=samples)
        if "one-layer" in spec.schemes:
            point.curves[("one-layer", mode)] = _fading_curve(one, t0)
        if "two-layer" in spec.schemes:
            t0 = time.perf_counter()
            two = optimize_fading(params, mode, 2, budget=budget, samples=samples, initial=[(0.0, one.rates)])
            point.curves[("two-layer", mode)] = _fading_curve(two, t0)
    return point


def _fading_curve(opt, t0) -> _Curve:
    return _Curve(opt.estimate, (opt.lambda2, *opt.rates.as_tuple()), opt.std_error, (), _ms(t0))


def _ms(t0: float) -> float:
    return 1e3 * (time.perf_counter() - t0)


# --------------------------------------------------------------- second pass


def _nonfading_reseed(spec: SweepSpec, point: _Point, pool: list) -> _Point:
    if point.skipped:
        return point
    params = spec.params_at(point.value)
    for (scheme, mode), curve in point.curves.items():
        cands = [curve.strategy] + [lam for s, lam in pool if SCHEMES[s] <= SCHEMES[scheme]]
        scores = _batch_average(params, noises_for_mode(params, mode))(np.array(cands))
        best = int(np.argmax(scores))
        if best and scores[best] > scores[0]:
            rep = achievable_throughput(params, np.array(cands[best]), mode)
            point.curves[(scheme, mode)] = _Curve(
                rep.average, tuple(rep.lambda_), None, tuple(rep.rates.as_list()), curve.ms
            )
    return point


def _fading_reseed(spec: SweepSpec, point: _Point, pool: list) -> _Point:
    if point.skipped:
        return point
    samples = SampleSet(spec.params_at(point.value), spec.mc_samples, spec.seed)
    for (scheme, mode), curve in point.curves.items():
        cands = [curve.strategy] + [st for s, st in pool if _layers(s) <= _layers(scheme)]
        means = [float(np.mean(samples.per_draw(c[0], FadingRates(*c[1:]), mode))) for c in cands]
        best = int(np.argmax(means))
        if best and means[best] > means[0]:
            est, err = samples.estimate(cands[best][0], FadingRates(*cands[best][1:]), mode)
            point.curves[(scheme, mode)] = _Curve(est, tuple(cands[best]), err, (), curve.ms)
    return point


def _first(args):
    spec, value = args
    return (_fading_point if spec.scenario == "fading" else _nonfading_point)(spec, value)


def _second(args):
    spec, point, pool = args
    return (_fading_reseed if spec.scenario == "fading" else _nonfading_reseed)(spec, point, pool)


def _map(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))


def run_sweep(spec: SweepSpec, jobs: int = 1, timing: bool = False) -> list[ResultRow]:
    """Optimized curves over the sweep grid, one row per (value, scheme, mode).

    Rows come in sweep order; within a point, schemes in configuration order, each
    with its modes in configuration order, then the upper bound if requested. ``ms``
    (wall time of the first-pass optimization) is filled only with
    ``timing``, since it would make the output nondeterministic.
    """
    values = [float(v) for v in spec.values()]
    points = _map(_first, [(spec, v) for v in values], jobs)
    pool = []
    for point in points:
        for (scheme, _), curve in point.curves.items():
            pool.append((scheme, curve.strategy))
    points = _map(_second, [(spec, p, pool) for p in points], jobs)
    return [row for p in points for row in _rows(spec, p, timing)]


def run_point(spec: SweepSpec, value: float) -> list[ResultRow]:
    """Rows of every curve at a single value of the swept parameter."""
    point = _first((spec, float(value)))
    pool = [(scheme, c.strategy) for (scheme, _), c in point.curves.items()]
    return _rows(spec, _second((spec, point, pool)), timing=False)


def _rows(spec: SweepSpec, point: _Point, timing: bool) -> list[ResultRow]:
    rows = []
    common = dict(swept_param=spec.param, value=point.value, scenario=spec.scenario)
    keys = _curve_keys(spec)
    if spec.scenario == "nonfading" and "upper" in spec.modes:
        keys.append((UPPER_SCHEME, "upper"))
    if point.skipped:
        log.warning("skipping %s = %g: %s", spec.param, point.value, point.skipped)
        return [ResultRow(scheme=s, mode=m, throughput=None, **common) for s, m in keys]
    for scheme, mode in keys:
        if scheme == UPPER_SCHEME:
            c = point.upper
            rows.append(ResultRow(scheme=scheme, mode=mode, throughput=c.value, ms=c.ms if timing else None, **common))
            continue
        c = point.curves[(scheme, mode)]
        if spec.scenario == "fading":
            lam2 = c.strategy[0]
            lam, rates = (1.0 - lam2, lam2), c.strategy[1:]
        else:
            lam, rates = c.strategy, c.rates
        rows.append(ResultRow(
            scheme=scheme, mode=mode, throughput=c.value, std_error=c.std_error,
            lam=lam, rates=rates, ms=c.ms if timing else None, **common,
        ))
    return rows


# ------------------------------------------------------------ emission guard


def check_rows(rows: list[ResultRow], tol: float = 1e-9) -> list[str]:
    """Orderings every sweep must satisfy; returns the violations found.

    Non-fading: the upper bound dominates every curve, joint decompression
    dominates separate, and a scheme dominates every scheme it contains.
    Fading: two layers dominate one, individual decoding dominates common.
    """
    problems = []
    by_value: dict = {}
    for r in rows:
        if not r.skipped:
            by_value.setdefault(r.value, {})[(r.scheme, r.mode)] = r.throughput
    for value, curves in by_value.items():

        def below(a, b, why):
            if a in curves and b in curves and curves[a] < curves[b] - tol * max(1.0, abs(curves[b])):
                problems.append(f"at {value:g}: {a} = {curves[a]:.12g} below {b} = {curves[b]:.12g} ({why})")

        upper = curves.get((UPPER_SCHEME, "upper"))
        for key, t in curves.items():
            if key[0] == UPPER_SCHEME:
                continue
            if upper is not None and key[1] in ("separate", "joint"):
                below((UPPER_SCHEME, "upper"), key, "upper bound")
            scheme, mode = key
            if mode == "joint":
                below(key, (scheme, "separate"), "joint vs separate")
            if mode == "individual":
                below(key, (scheme, "common"), "individual vs common")
            for other, other_mode in curves:
                if other_mode != mode or other == scheme:
                    continue
                if scheme in SCHEMES and other in SCHEMES and SCHEMES[other] <= SCHEMES[scheme]:
                    below(key, (other, mode), "scheme nesting")
                if scheme in FADING_SCHEMES and other in FADING_SCHEMES and _layers(other) < _layers(scheme):
                    below(key, (other, mode), "layer nesting")
    return problems
