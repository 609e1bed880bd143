"""Numeric kernels shared by the throughput evaluators.

Both optimizers take *batched* objectives: a callable mapping an ``(n, d)``
array of candidate points to an ``(n,)`` array of values. Polls and grids are
evaluated in one call, which keeps the 2x2 log-det arithmetic vectorized.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.stats import qmc

from .errors import InfeasibleError, NoPositiveRootError, SingularDenominatorError
from .model import HermitianM2

__all__ = [
    "logdet_form",
    "positive_quadratic_root",
    "SchemeMask",
    "SCHEMES",
    "SimplexResult",
    "BoxResult",
    "maximize_on_simplex",
    "maximize_on_box",
    "RateAssignment",
    "max_weight_rates",
    "max_weight_rates_lp",
    "rate_weights",
]

PD_FLOOR = 1e-12
SIMPLEX_PITCH = 0.05
SIMPLEX_MIN_STEP = 1e-4
LOG_GRID = (1e-6, 1e6, 32)

BatchObjective = Callable[[np.ndarray], np.ndarray]


def logdet_form(num: HermitianM2, den: HermitianM2, scale: float = 1.0):
    """``scale * log2 det(I + num den^-1)``, evaluated as ``det(den + num) / det(den)``."""
    lo, _ = den.eigvalsh()
    if np.any(~(np.asarray(lo) > PD_FLOOR)):
        raise SingularDenominatorError(
            f"denominator is not positive definite (min eigenvalue {np.min(lo):.3g})"
        )
    ratio = (den + num).det() / den.det()
    return scale * np.log2(ratio)


def positive_quadratic_root(a: float, b: float, c: float) -> float:
    """Unique positive root of ``a s^2 + b s + c`` for ``a > 0 > c``."""
    if not (a > 0 and c < 0):
        raise NoPositiveRootError(f"need a > 0 > c, got a={a}, c={c}")
    disc = b * b - 4.0 * a * c
    sq = np.sqrt(disc)
    # cancellation-free branch for each sign of b
    s = (-b + sq) / (2.0 * a) if b < 0 else (2.0 * c) / (-b - sq)
    residual = abs(a * s * s + b * s + c)
    if residual > 1e-10 * max(abs(a) * s * s, abs(c)):
        raise NoPositiveRootError(f"root {s} has residual {residual}")
    return float(s)


@dataclass(frozen=True)
class SchemeMask:
    """Layers (1-based) allowed to carry power."""

    layers: frozenset
    name: str = ""

    def __post_init__(self):
        layers = frozenset(int(k) for k in self.layers)
        if not layers or 1 not in layers or not layers <= {1, 2, 3, 4, 5}:
            raise ValueError(f"invalid scheme mask {sorted(layers)}")
        object.__setattr__(self, "layers", layers)

    @property
    def indices(self) -> list[int]:
        """Zero-based positions, ascending."""
        return sorted(k - 1 for k in self.layers)

    def __le__(self, other: "SchemeMask") -> bool:
        return self.layers <= other.layers


SCHEMES = {
    "one-layer": SchemeMask(frozenset({1}), "one-layer"),
    "scheme1": SchemeMask(frozenset({1, 5}), "scheme1"),
    "scheme2": SchemeMask(frozenset({1, 2}), "scheme2"),
    "three-layer": SchemeMask(frozenset({1, 2, 5}), "three-layer"),
    "five-layer": SchemeMask(frozenset({1, 2, 3, 4, 5}), "five-layer"),
}


@dataclass
class SimplexResult:
    weights: np.ndarray
    value: float
    evaluations: int


@dataclass
class BoxResult:
    point: np.ndarray
    value: float
    evaluations: int


class _Counter:
    """Wraps a batched objective and counts evaluations."""

    def __init__(self, objective: BatchObjective):
        self.objective = objective
        self.count = 0

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        self.count += len(points)
        values = np.asarray(self.objective(points), dtype=float).reshape(len(points))
        return values


def _simplex_grid(m: int, pitch: float) -> np.ndarray:
    n = int(round(1.0 / pitch))
    rows = [
        head + (n - sum(head),)
        for head in itertools.product(range(n + 1), repeat=m - 1)
        if sum(head) <= n
    ]
    return np.array(rows, dtype=float) / n


def _top_distinct(values: np.ndarray, k: int) -> list[int]:
    # stable sort: equal values keep grid order, so ties go to the earliest point
    order = np.argsort(-values, kind="stable")
    picked: list[int] = []
    for idx in order:
        if len(picked) == k:
            break
        if any(values[idx] == values[j] for j in picked):
            continue
        picked.append(int(idx))
    return picked


def _simplex_search(f, x, fx, step, min_step, budget_left, counter):
    m = len(x)
    pairs = [(a, b) for a in range(m) for b in range(m) if a != b]
    start = counter.count
    while step >= min_step and counter.count - start < budget_left:
        cands = []
        for a, b in pairs:
            amount = min(step, x[a])
            if amount <= 0:
                continue
            y = x.copy()
            y[a] -= amount
            y[b] += amount
            cands.append(y)
        if not cands:
            break
        cands = np.array(cands)
        vals = f(cands)
        best = int(np.argmax(vals))
        if vals[best] > fx + 1e-14 * max(1.0, abs(fx)):
            x, fx = cands[best], float(vals[best])
        else:
            step *= 0.5
    return x, fx


def maximize_on_simplex(
    objective: BatchObjective,
    mask: SchemeMask,
    budget: int = 4000,
    *,
    n_layers: int = 5,
    pitch: float = SIMPLEX_PITCH,
    min_step: float = SIMPLEX_MIN_STEP,
    starts: int = 3,
    initial: Iterable[Sequence[float]] = (),
) -> SimplexResult:
    """Maximize a batched objective over the simplex restricted to ``mask``.

    A full grid of pitch ``pitch`` over the masked face is evaluated first, then
    a pattern search moving mass between pairs of layers refines the best
    ``starts`` grid points (plus any ``initial`` points) down to ``min_step``.
    ``budget`` caps the evaluations spent in refinement; the grid is always
    evaluated in full.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    idx = mask.indices
    m = len(idx)

    def embed(w: np.ndarray) -> np.ndarray:
        full = np.zeros((len(w), n_layers))
        full[:, idx] = w
        return full

    counter = _Counter(lambda w: objective(embed(w)))
    if m == 1:
        w = np.ones((1, 1))
        value = float(counter(w)[0])
        return SimplexResult(embed(w)[0], value, counter.count)

    grid = _simplex_grid(m, pitch)
    values = counter(grid)
    start_points = [(grid[i], float(values[i])) for i in _top_distinct(values, starts)]
    extra = [np.asarray(p, dtype=float)[idx] for p in initial]
    if extra:
        extra = np.clip(np.array(extra), 0.0, None)
        extra /= extra.sum(axis=1, keepdims=True)
        for w, v in zip(extra, counter(extra)):
            start_points.append((w, float(v)))

    per_start = max(1, budget // len(start_points))
    best_w, best_v = start_points[0]
    for w0, v0 in start_points:
        w, v = _simplex_search(counter, w0.copy(), v0, pitch, min_step, per_start, counter)
        if v > best_v:
            best_w, best_v = w, v

    best_w = np.clip(best_w, 0.0, None)
    best_w = best_w / best_w.sum()
    final = float(counter(best_w[None, :])[0])
    return SimplexResult(embed(best_w[None, :])[0], final, counter.count)


def _separated(xs: np.ndarray, values: np.ndarray, k: int, min_dist: float, width: np.ndarray) -> list[int]:
    """Indices of up to ``k`` best points that are pairwise at least ``min_dist`` apart."""
    order = np.argsort(-values, kind="stable")
    picked: list[int] = []
    for i in order:
        if not np.isfinite(values[i]):
            break
        if all(np.linalg.norm((xs[i] - xs[j]) / width) >= min_dist for j in picked):
            picked.append(int(i))
            if len(picked) == k:
                break
    return picked


def _poll_directions(n: int, k: int) -> np.ndarray:
    """Coordinate directions plus a Householder basis that rotates with ``k``.

    The rotating half makes the direction set dense over iterations, so the
    search keeps making progress along curved constraint boundaries.
    """
    halton = qmc.Halton(d=n, scramble=False).random(k + 2)[k + 1]
    v = 2.0 * halton - 1.0
    norm = np.linalg.norm(v)
    v = v / norm if norm > 0 else np.eye(n)[0]
    house = np.eye(n) - 2.0 * np.outer(v, v)
    eye = np.eye(n)
    return np.vstack([eye, -eye, house, -house])


def maximize_on_box(
    objective: BatchObjective,
    lower: Sequence[float],
    upper: Sequence[float],
    feasible: Callable[[np.ndarray], np.ndarray] | None = None,
    budget: int = 2000,
    *,
    scale: str = "log",
    points_per_axis: int | Sequence[int] | None = None,
    min_step: float = 1e-10,
    starts: int = 3,
    rotations: int = 8,
    initial: Iterable[Sequence[float]] = (),
    design: str = "grid",
    design_points: int | None = None,
    separation: float = 0.0,
) -> BoxResult:
    """Maximize a batched objective over a box, skipping infeasible points.

    With ``scale="log"`` the grid is logarithmically spaced and the pattern
    search runs in ``log10`` coordinates; ``scale="linear"`` uses the raw
    coordinates. Points failing ``feasible`` are never passed to the objective.
    ``budget`` caps evaluations spent after the grid. The step halves only
    after ``rotations`` consecutive unsuccessful polls with distinct rotated
    direction sets.

    ``design="halton"`` replaces the full grid by ``design_points`` points of
    an unscrambled Halton sequence, which covers three or more dimensions far
    better than a coarse factorial grid of the same size. ``design="none"``
    starts only from ``initial``, with steps sized as for a Halton design of
    ``design_points`` points. Starting points are
    the best design points whose box-normalized distance from every earlier
    start is at least ``separation``, so multiple basins get explored.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    n = len(lower)
    if np.any(lower > upper):
        raise ValueError("empty box")
    if scale == "log":
        if np.any(lower <= 0):
            raise ValueError("log-scaled box needs positive bounds")
        to_x, from_x = np.log10, lambda x: 10.0**x
    elif scale == "linear":
        to_x, from_x = (lambda x: x), (lambda x: x)
    else:
        raise ValueError(f"unknown scale {scale!r}")
    lo, hi = to_x(lower), to_x(upper)

    if design == "grid":
        if points_per_axis is None:
            points_per_axis = LOG_GRID[2]
        counts = np.broadcast_to(np.asarray(points_per_axis, dtype=int), (n,))
        axes = [np.linspace(lo[i], hi[i], counts[i]) if counts[i] > 1 else np.array([lo[i]]) for i in range(n)]
        grid_x = np.array(list(itertools.product(*axes)), dtype=float).reshape(-1, n)
        pitch = np.array([(a[1] - a[0]) if len(a) > 1 else (hi[i] - lo[i]) / 2 or 1.0 for i, a in enumerate(axes)])
    elif design == "halton":
        m = int(design_points or LOG_GRID[2] ** min(n, 2))
        if m < 1:
            raise ValueError("design_points must be >= 1")
        grid_x = lo + (hi - lo) * qmc.Halton(d=n, scramble=False).random(m)
        width = np.where(hi > lo, hi - lo, 1.0)
        pitch = width / max(2.0, m ** (1.0 / n))
    elif design == "none":
        grid_x = np.empty((0, n))
        width = np.where(hi > lo, hi - lo, 1.0)
        pitch = width / max(2.0, int(design_points or 1) ** (1.0 / n))
    else:
        raise ValueError(f"unknown design {design!r}")

    is_feasible = feasible if feasible is not None else (lambda pts: np.ones(len(pts), dtype=bool))
    counter = _Counter(lambda xs: objective(from_x(xs)))

    def evaluate(xs: np.ndarray) -> np.ndarray:
        out = np.full(len(xs), -np.inf)
        ok = np.asarray(is_feasible(from_x(xs)), dtype=bool).reshape(len(xs))
        if ok.any():
            out[ok] = counter(xs[ok])
        return out

    values = evaluate(grid_x) if len(grid_x) else np.empty(0)
    if len(grid_x) and not np.isfinite(values).any():
        raise InfeasibleError("no grid point satisfies the feasibility predicate")

    if not len(grid_x):
        chosen = []
    elif separation > 0.0:
        chosen = _separated(grid_x, values, starts, separation, np.where(hi > lo, hi - lo, 1.0))
    else:
        chosen = _top_distinct(values, starts)
    start_points = [(grid_x[i], float(values[i])) for i in chosen if np.isfinite(values[i])]
    extra = [to_x(np.clip(np.asarray(p, dtype=float), lower, upper)) for p in initial]
    if extra:
        extra = np.array(extra)
        for x, v in zip(extra, evaluate(extra)):
            if np.isfinite(v):
                start_points.append((x, float(v)))
    if not start_points:
        raise InfeasibleError("no feasible starting point")

    rel_step = pitch
    # in one dimension every rotated set repeats the same two directions
    patience = rotations if n > 1 else 1
    per_start = max(1, budget // len(start_points))
    best_x, best_v = start_points[0]
    for x0, v0 in start_points:
        x, v = x0.copy(), v0
        step = 1.0
        k = 0
        failures = 0
        start_count = counter.count
        while step * rel_step.max() >= min_step and counter.count - start_count < per_start:
            dirs = _poll_directions(n, k)
            k += 1
            cands = np.clip(x + step * dirs * rel_step, lo, hi)
            cands = cands[np.any(cands != x, axis=1)]
            # a partial poll keeps the cap exact
            cands = cands[: max(1, per_start - (counter.count - start_count))]
            vals = evaluate(cands) if len(cands) else np.array([-np.inf])
            best = int(np.argmax(vals))
            if vals[best] > v + 1e-14 * max(1.0, abs(v)):
                x, v = cands[best], float(vals[best])
                failures = 0
            else:
                failures += 1
                if failures >= patience:
                    step *= 0.5
                    failures = 0
        if v > best_v:
            best_x, best_v = x, v

    return BoxResult(from_x(best_x), float(best_v), counter.count)


@dataclass
class RateAssignment:
    """Per-user, per-layer rates; ``rates[..., j-1, k-1]`` is user ``j`` layer ``k``."""

    rates: np.ndarray = field(default_factory=lambda: np.zeros((2, 5)))

    def __getitem__(self, jk) -> float:
        j, k = jk
        return self.rates[..., j - 1, k - 1]

    def as_list(self) -> list[float]:
        return [float(r) for r in np.asarray(self.rates).reshape(-1)]


def rate_weights(p_low: float) -> np.ndarray:
    """Coefficient of each rate ``R_jk`` in the average throughput."""
    q = 1.0 - p_low
    row = np.array([1.0, 1.0 - p_low**2, q, q, q * q])
    return np.vstack([row, row])


def max_weight_rates(bounds, weights=None) -> RateAssignment:
    """Rates maximizing the average throughput inside the rate polytope.

    ``bounds`` holds the six right-hand sides ``(c_a, ..., c_f)`` (scalars or
    arrays). All objective weights are positive, so the layer-1, layer-2 and
    layer-5 sum constraints bind and the layer-3/4 block reaches
    ``2 min(c_e, c_c + c_d)``. Sums are split evenly; the 3/4 block fills
    layer 3 first. ``weights`` is accepted for interface symmetry with
    :func:`max_weight_rates_lp` and must be positive if given.
    """
    if weights is not None and np.any(np.asarray(weights) <= 0):
        raise ValueError("closed form needs positive weights")
    ca, cb, cc, cd, ce, cf = (np.asarray(c, dtype=float) for c in bounds)
    shape = np.broadcast(ca, cb, cc, cd, ce, cf).shape
    r = np.zeros(shape + (2, 5))
    r[..., 0, 0] = r[..., 1, 0] = ca / 2
    r[..., 0, 1] = r[..., 1, 1] = cb / 2
    r3 = np.minimum(cc, ce)
    r4 = np.minimum(cd, ce - r3)
    # user 1 decodes layer 3 with HL, user 2 decodes layer 3 with LH (mirror)
    r[..., 0, 2] = r[..., 1, 2] = r3
    r[..., 0, 3] = r[..., 1, 3] = r4
    r[..., 0, 4] = r[..., 1, 4] = cf / 2
    return RateAssignment(r)


def max_weight_rates_lp(bounds, weights) -> tuple[np.ndarray, float]:
    """Generic LP solve of the same problem; used as an independent check.

    Returns the optimal ``(2, 5)`` rate array and the optimal weighted sum.
    """
    from scipy.optimize import linprog

    ca, cb, cc, cd, ce, cf = (float(c) for c in bounds)
    w = np.asarray(weights, dtype=float).reshape(10)

    def row(*jk):
        v = np.zeros(10)
        for j, k in jk:
            v[(j - 1) * 5 + (k - 1)] = 1.0
        return v

    a_ub = [
        row((1, 1), (2, 1)),
        row((1, 2), (2, 2)),
        row((1, 3)),
        row((2, 3)),
        row((1, 4)),
        row((2, 4)),
        row((1, 3), (2, 4)),
        row((2, 3), (1, 4)),
        row((1, 5), (2, 5)),
    ]
    b_ub = [ca, cb, cc, cc, cd, cd, ce, ce, cf]
    res = linprog(-w, A_ub=np.array(a_ub), b_ub=b_ub, bounds=[(0, None)] * 10, method="highs")
    if not res.success:
        raise RuntimeError(res.message)
    return res.x.reshape(2, 5), float(-res.fun)
