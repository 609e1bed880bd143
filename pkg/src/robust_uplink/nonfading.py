"""Throughput with constant unit gains: five-layer broadcast coding over
successive-refinement compression, and the state-aware upper bound.

Signals are real here, so every rate expression carries the factor 1/2.
"""
from __future__ import annotations

from dataclasses import astuple, dataclass
from typing import Iterable, Sequence

import numpy as np

from .model import HermitianM2, SystemParams, check_capacity, gain_matrices_nf
from .numerics import (
    LOG_GRID,
    SCHEMES,
    RateAssignment,
    SchemeMask,
    logdet_form,
    max_weight_rates,
    maximize_on_box,
    maximize_on_simplex,
    positive_quadratic_root,
)

__all__ = [
    "CompressionNoises",
    "LayerBounds",
    "ThroughputReport",
    "UpperBoundTerms",
    "RateAssignment",
    "sigma_separate",
    "sigma_joint",
    "layer_bounds",
    "state_throughputs",
    "average_throughput",
    "achievable_throughput",
    "optimize_scheme",
    "upper_bound",
    "upper_bound_terms",
    "noises_for_mode",
]

MODES = ("separate", "joint")


def _pow2m1(x):
    """``2**x - 1`` without cancellation for small ``x``."""
    return np.expm1(np.asarray(x, dtype=float) * np.log(2.0))


@dataclass(frozen=True)
class CompressionNoises:
    """Extra coarse-layer noise ``sigma1_sq`` and refined-layer noise ``sigma2_sq``."""

    sigma1_sq: float
    sigma2_sq: float

    @property
    def coarse(self) -> float:
        """Total noise variance on the coarse description."""
        return self.sigma1_sq + self.sigma2_sq


def _received_variance(params: SystemParams) -> float:
    return params.power * (1.0 + params.alpha**2) + 1.0


def sigma_separate(params: SystemParams) -> CompressionNoises:
    """Compression noises when each base station is decompressed on its own."""
    check_capacity(params)
    c, dc = params.cap_low, params.cap_delta
    k = _received_variance(params)
    sigma2 = k / _pow2m1(2.0 * (c + dc))
    if dc == 0.0:
        return CompressionNoises(0.0, float(sigma2))
    sigma1 = 2.0 ** (2.0 * c) * _pow2m1(2.0 * dc) * k / (_pow2m1(2.0 * c) * _pow2m1(2.0 * (c + dc)))
    return CompressionNoises(float(sigma1), float(sigma2))


def _sum_constraint_root(params: SystemParams, rate: float) -> float:
    """Total noise ``s`` with ``rate = 1/2 log(1 + b1/s) + 1/2 log(1 + b2/s)``."""
    p, a = params.power, params.alpha
    b1 = p * (1.0 - a) ** 2 + 1.0
    b2 = p * (1.0 + a) ** 2 + 1.0
    return positive_quadratic_root(float(_pow2m1(2.0 * rate)), -(b1 + b2), -b1 * b2)


def joint_residuals(params: SystemParams, noises: CompressionNoises) -> tuple[float, float]:
    """Residuals of the two equations defining the joint-decompression noises."""
    p, a = params.power, params.alpha
    s = noises.coarse
    k = _received_variance(params)
    b1 = p * (1.0 - a) ** 2 + 1.0
    b2 = p * (1.0 + a) ** 2 + 1.0
    r_sum = 0.5 * np.log2(1.0 + b1 / s) + 0.5 * np.log2(1.0 + b2 / s) - 2.0 * params.cap_low
    r_ref = (
        0.5 * np.log2(1.0 + noises.sigma1_sq / noises.sigma2_sq)
        + 0.5 * np.log2(1.0 - noises.sigma1_sq / (k + s))
        - params.cap_delta
    )
    return float(r_sum), float(r_ref)


def sigma_joint(params: SystemParams) -> CompressionNoises:
    """Compression noises when the coarse descriptions are decompressed jointly."""
    check_capacity(params)
    k = _received_variance(params)
    s = _sum_constraint_root(params, 2.0 * params.cap_low)
    if params.cap_delta == 0.0:
        noises = CompressionNoises(0.0, s)
    else:
        sigma2 = s * k / (2.0 ** (2.0 * params.cap_delta) * (k + s) - s)
        noises = CompressionNoises(s - sigma2, sigma2)
    r_sum, r_ref = joint_residuals(params, noises)
    if max(abs(r_sum), abs(r_ref)) > 1e-10:
        raise ArithmeticError(f"joint noise residuals too large: {r_sum:.3g}, {r_ref:.3g}")
    return noises


def noises_for_mode(params: SystemParams, mode: str) -> CompressionNoises:
    if mode == "separate":
        return sigma_separate(params)
    if mode == "joint":
        return sigma_joint(params)
    raise ValueError(f"unknown decompression mode {mode!r}")


@dataclass(frozen=True)
class LayerBounds:
    """Right-hand sides of the six rate constraints (scalars or arrays)."""

    c_a: float
    c_b: float
    c_c: float
    c_d: float
    c_e: float
    c_f: float

    def __iter__(self):
        return iter(astuple(self))

    def as_array(self) -> np.ndarray:
        return np.stack([np.asarray(c, dtype=float) for c in self], axis=-1)


def layer_bounds(params: SystemParams, lam, noises: CompressionNoises) -> LayerBounds:
    """Evaluate the six layer-rate bounds for power split(s) ``lam``.

    ``lam`` has shape ``(5,)`` or ``(n, 5)``. The asymmetric noise
    ``diag(1 + sigma2, 1 + sigma1 + sigma2)`` is the state where link 1 is high;
    the mirrored state gives identical values by symmetry.
    """
    lam = np.asarray(lam, dtype=float)
    l1, l2, l3, l4, l5 = (lam[..., k] for k in range(5))
    a1, a2 = gain_matrices_nf(params.alpha)
    p = params.power
    both = a1 + a2
    n_high = 1.0 + noises.sigma2_sq
    n_low = 1.0 + noises.coarse

    def interference(w1, w2) -> HermitianM2:
        return a1 * (p * w1) + a2 * (p * w2)

    asym = HermitianM2.diag(n_high, n_low)
    den_a = interference(l2 + l3 + l4 + l5, l2 + l3 + l4 + l5) + HermitianM2.diag(n_low, n_low)
    den_b = interference(l3 + l4 + l5, l3 + l4 + l5) + asym
    den_34 = interference(l4 + l5, l3 + l5) + asym

    c_a = logdet_form(both * (p * l1), den_a, 0.5)
    c_b = logdet_form(both * (p * l2), den_b, 0.5)
    c_c = logdet_form(a1 * (p * l3), den_34, 0.5)
    c_d = logdet_form(a2 * (p * l4), den_34, 0.5)
    c_e = logdet_form(a1 * (p * l3) + a2 * (p * l4), den_34, 0.5)
    c_f = logdet_form(both * (p * l5), HermitianM2.diag(n_high, n_high), 0.5)
    return LayerBounds(c_a, c_b, c_c, c_d, c_e, c_f)


def state_throughputs(rates: RateAssignment):
    """Delivered sum rate in states LL, HL, LH, HH."""
    r = np.asarray(rates.rates)
    t1 = r[..., 0, 0] + r[..., 1, 0]
    common = t1 + r[..., 0, 1] + r[..., 1, 1]
    t2 = common + r[..., 0, 2] + r[..., 1, 3]
    t3 = common + r[..., 0, 3] + r[..., 1, 2]
    t4 = r.sum(axis=(-2, -1))
    return t1, t2, t3, t4


def average_throughput(t1, t2, t3, t4, p_low: float):
    q = 1.0 - p_low
    return p_low**2 * t1 + p_low * q * (t2 + t3) + q**2 * t4


@dataclass
class ThroughputReport:
    t1: float
    t2: float
    t3: float
    t4: float
    average: float
    lambda_: np.ndarray
    mode: str
    rates: RateAssignment | None = None
    bounds: LayerBounds | None = None


def achievable_throughput(params: SystemParams, lam, mode: str = "joint", noises=None) -> ThroughputReport:
    """Average throughput of the five-layer scheme at power split ``lam``."""
    lam = _as_simplex_point(lam)
    if noises is None:
        noises = noises_for_mode(params, mode)
    bounds = layer_bounds(params, lam, noises)
    rates = max_weight_rates(bounds)
    t = [float(x) for x in state_throughputs(rates)]
    avg = float(average_throughput(*t, params.p_low))
    return ThroughputReport(*t, avg, lam, mode, rates, bounds)


def _as_simplex_point(lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=float).reshape(-1)
    if lam.shape != (5,):
        raise ValueError(f"power split needs 5 weights, got {lam.shape}")
    if np.any(lam < 0) or abs(lam.sum() - 1.0) > 1e-12:
        raise ValueError(f"power split must lie on the simplex, got {lam}")
    return lam


def _batch_average(params: SystemParams, noises: CompressionNoises):
    def objective(lams: np.ndarray) -> np.ndarray:
        rates = max_weight_rates(layer_bounds(params, lams, noises))
        return average_throughput(*state_throughputs(rates), params.p_low)

    return objective


def optimize_scheme(
    params: SystemParams,
    mode: str = "joint",
    mask: SchemeMask | str = "five-layer",
    budget: int = 4000,
    initial: Iterable[Sequence[float]] = (),
) -> ThroughputReport:
    """Maximize the average throughput over power splits allowed by ``mask``.

    ``initial`` seeds the refinement with extra splits, e.g. the optimum of a
    nested smaller scheme.
    """
    if isinstance(mask, str):
        mask = SCHEMES[mask]
    noises = noises_for_mode(params, mode)
    result = maximize_on_simplex(_batch_average(params, noises), mask, budget, initial=initial)
    report = achievable_throughput(params, result.weights, mode, noises)
    return report


@dataclass(frozen=True)
class UpperBoundTerms:
    t1: float
    t2: float
    t3: float
    sigma1_sq: float
    sigma4_sq: float
    sigma23_sq: tuple[float, float]
    average: float


def _partial_state_bound(params: SystemParams, budget: int) -> tuple[float, tuple[float, float]]:
    """Best sum rate with link 1 high and link 2 low, over the two noise levels.

    For a fixed link-1 noise ``x`` every compression constraint is linear in
    the link-2 noise ``y``: two give lower limits, one an upper limit. The
    objective decreases in ``y``, so ``y`` sits at its larger lower limit and
    only ``x`` is searched.
    """
    a1, a2 = gain_matrices_nf(params.alpha)
    p, a = params.power, params.alpha
    both = (a1 + a2) * p
    k = _received_variance(params)
    cross = 4.0 * a**2 * p**2
    hi = 2.0 ** (2.0 * (params.cap_low + params.cap_delta))
    lo = 2.0 ** (2.0 * params.cap_low)
    tot = 2.0 ** (2.0 * (2.0 * params.cap_low + params.cap_delta))

    def limits(x):
        head = (k + x) * k - cross
        y_low = head / ((lo - 1.0) * (k + x))
        slope = tot * x - (k + x)
        with np.errstate(divide="ignore", invalid="ignore"):
            y_sum = np.where(slope > 0, head / slope, np.inf)
            room = k + x * (1.0 - hi)
            y_high = np.where(room > 0, cross / room - k, np.inf)
        return np.maximum(y_low, y_sum), y_high

    def feasible(pts):
        y, y_high = limits(pts[:, 0])
        return np.isfinite(y) & (y <= y_high)

    def objective(pts):
        x = pts[:, 0]
        y, _ = limits(x)
        return logdet_form(both, HermitianM2.diag(1.0 + x, 1.0 + y), 0.5)

    res = maximize_on_box(objective, [LOG_GRID[0]], [LOG_GRID[1]], feasible, budget, scale="log")
    x = float(res.point[0])
    y = float(limits(np.array([x]))[0][0])
    return res.value, (x, y)


def partial_state_constraints(params: SystemParams, x: float, y: float) -> np.ndarray:
    """Slack of the three compression constraints at noises ``(x, y)``; all >= 0 when feasible."""
    p, a = params.power, params.alpha
    k = _received_variance(params)
    d = (k + x) * (k + y) - 4.0 * a**2 * p**2
    c, dc = params.cap_low, params.cap_delta
    return np.array(
        [
            c + dc - 0.5 * np.log2(d / ((k + y) * x)),
            c - 0.5 * np.log2(d / ((k + x) * y)),
            2.0 * c + dc - 0.5 * np.log2(d / (x * y)),
        ]
    )


def upper_bound_terms(params: SystemParams, budget: int = 3000) -> UpperBoundTerms:
    check_capacity(params)
    a1, a2 = gain_matrices_nf(params.alpha)
    both = (a1 + a2) * params.power
    sigma1 = _sum_constraint_root(params, 2.0 * params.cap_low)
    sigma4 = _sum_constraint_root(params, 2.0 * (params.cap_low + params.cap_delta))
    t1 = float(logdet_form(both, HermitianM2.diag(1.0 + sigma1, 1.0 + sigma1), 0.5))
    t3 = float(logdet_form(both, HermitianM2.diag(1.0 + sigma4, 1.0 + sigma4), 0.5))
    t2, s23 = _partial_state_bound(params, budget)
    p = params.p_low
    avg = p**2 * t1 + 2.0 * p * (1.0 - p) * t2 + (1.0 - p) ** 2 * t3
    return UpperBoundTerms(t1, float(t2), t3, sigma1, sigma4, s23, float(avg))


def upper_bound(params: SystemParams, budget: int = 3000) -> float:
    """Average throughput bound when every node knows the backhaul state."""
    return upper_bound_terms(params, budget).average
