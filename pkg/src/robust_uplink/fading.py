"""Two-layer broadcast coding under quasi-static Rayleigh fading.

Signals are complex, so log-det expressions carry no 1/2. Backhaul states are
enumerated exactly and weighted by their probabilities; only the fading is
sampled (conditional Monte Carlo). Sample ``i`` of stream ``seed`` is the same
regardless of how an index range is split, so estimates are reproducible under
any chunking.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import qmc

from .model import (
    BackhaulState,
    ChannelGains,
    HermitianM2,
    SystemParams,
    check_capacity,
    gain_matrices_fading,
    sample_gains_block,
    state_probabilities,
)
from .numerics import _separated, logdet_form, maximize_on_box

__all__ = [
    "FadingNoises",
    "FadingRates",
    "DecodeOutcome",
    "FadingOptimum",
    "fading_noises",
    "effective_noise",
    "joint_layer_region",
    "single_user_layer1_region",
    "second_layer_single_region",
    "decode_common",
    "decode_individual",
    "region_thresholds",
    "SampleSet",
    "mc_average_throughput",
    "optimize_fading",
    "optimize_shared",
    "rate_ceiling",
]

DECODING_MODES = ("common", "individual")


@dataclass(frozen=True)
class FadingNoises:
    """Per-base-station compression noises (scalars or arrays over samples)."""

    sigma11_sq: float
    sigma12_sq: float
    sigma21_sq: float
    sigma22_sq: float


@dataclass(frozen=True)
class FadingRates:
    """``rjk`` is the rate of user ``j``, layer ``k``."""

    r11: float
    r21: float
    r12: float = 0.0
    r22: float = 0.0

    def __post_init__(self):
        for name in ("r11", "r21", "r12", "r22"):
            value = float(getattr(self, name))
            if not (np.isfinite(value) and value >= 0):
                raise ValueError(f"rate {name} must be finite and >= 0, got {value}")
            object.__setattr__(self, name, value)

    @classmethod
    def symmetric(cls, first: float, second: float = 0.0) -> "FadingRates":
        return cls(first, first, second, second)

    def swap_users(self) -> "FadingRates":
        return FadingRates(self.r21, self.r11, self.r22, self.r12)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.r11, self.r21, self.r12, self.r22)


@dataclass(frozen=True)
class DecodeOutcome:
    decoded: frozenset
    throughput: float


def fading_noises(params: SystemParams, g: ChannelGains) -> FadingNoises:
    check_capacity(params)
    p, a = params.power, params.alpha
    c, dc = params.cap_low, params.cap_delta
    refine = 1.0 / np.expm1((c + dc) * np.log(2.0))
    coarse_ratio = 0.0 if dc == 0.0 else 2.0**c * np.expm1(dc * np.log(2.0)) / np.expm1(c * np.log(2.0))
    s12 = (p * (np.abs(g.a11) ** 2 + a**2 * np.abs(g.a12) ** 2) + 1.0) * refine
    s22 = (p * (np.abs(g.a22) ** 2 + a**2 * np.abs(g.a21) ** 2) + 1.0) * refine
    return FadingNoises(coarse_ratio * s12, s12, coarse_ratio * s22, s22)


def effective_noise(noises: FadingNoises, state: BackhaulState):
    """Channel plus compression noise seen at the decoder for each base station."""
    f1 = 1.0 + noises.sigma12_sq + (0.0 if state.high1 else noises.sigma11_sq)
    f2 = 1.0 + noises.sigma22_sq + (0.0 if state.high2 else noises.sigma21_sq)
    return f1, f2


def _other(j: int) -> int:
    if j not in (1, 2):
        raise ValueError(f"user index must be 1 or 2, got {j}")
    return 3 - j


def _rate(rates: FadingRates, user: int, layer: int) -> float:
    return getattr(rates, f"r{user}{layer}")


def joint_layer_region(j, rates, lambda2, a1, a2, f1, f2, power):
    """Both users' layer-``j`` messages are jointly decodable (layer 1 treats layer 2 as noise)."""
    if j not in (1, 2):
        raise ValueError(f"layer must be 1 or 2, got {j}")
    lam = (1.0 - lambda2) if j == 1 else lambda2
    den = HermitianM2.diag(f1, f2)
    if j == 1:
        den = den + (a1 + a2) * (lambda2 * power)
    u1 = logdet_form(a1 * (lam * power), den)
    u2 = logdet_form(a2 * (lam * power), den)
    tot = logdet_form((a1 + a2) * (lam * power), den)
    r1, r2 = _rate(rates, 1, j), _rate(rates, 2, j)
    return (r1 <= u1) & (r2 <= u2) & (r1 + r2 <= tot)


def single_user_layer1_region(j, rates, lambda2, a1, a2, f1, f2, power):
    """Only user ``j``'s first layer is decodable, everything else treated as noise."""
    o = _other(j)
    aj, ao = (a1, a2) if j == 1 else (a2, a1)
    lam1 = 1.0 - lambda2
    diag = HermitianM2.diag(f1, f2)
    own = logdet_form(aj * (lam1 * power), aj * (lambda2 * power) + ao * power + diag)
    other = logdet_form(ao * (lam1 * power), (a1 + a2) * (lambda2 * power) + diag)
    return (_rate(rates, j, 1) <= own) & (_rate(rates, o, 1) > other)


def second_layer_single_region(j, variant, rates, lambda2, a1, a2, f1, f2, power):
    """User ``j``'s second layer is decodable on its own.

    ``variant="after-both"``: both first layers are known; the other user's
    second layer must also be undecodable given user ``j``'s full signal.
    ``variant="after-own"``: only user ``j``'s first layer is known and the
    other user's whole signal is noise.
    """
    o = _other(j)
    aj, ao = (a1, a2) if j == 1 else (a2, a1)
    diag = HermitianM2.diag(f1, f2)
    if variant == "after-both":
        own = logdet_form(aj * (lambda2 * power), ao * (lambda2 * power) + diag)
        other = logdet_form(ao * (lambda2 * power), diag)
        return (_rate(rates, j, 2) <= own) & (_rate(rates, o, 2) > other)
    if variant == "after-own":
        own = logdet_form(aj * (lambda2 * power), ao * power + diag)
        return _rate(rates, j, 2) <= own
    raise ValueError(f"unknown variant {variant!r}")


def _sample_regions(gains, state, params, lambda2, rates):
    a1, a2 = gain_matrices_fading(gains, params.alpha)
    f1, f2 = effective_noise(fading_noises(params, gains), state)
    args = (rates, lambda2, a1, a2, f1, f2, params.power)
    r1 = bool(joint_layer_region(1, *args))
    r2 = bool(joint_layer_region(2, *args))
    return a1, a2, f1, f2, r1, r2


def decode_common(gains: ChannelGains, state: BackhaulState, params: SystemParams, lambda2: float, rates: FadingRates) -> DecodeOutcome:
    """A layer counts only when both users' messages at that layer decode."""
    *_, r1, r2 = _sample_regions(gains, state, params, lambda2, rates)
    decoded = set()
    if r1:
        decoded |= {(1, 1), (2, 1)}
        if r2:
            decoded |= {(1, 2), (2, 2)}
    return DecodeOutcome(frozenset(decoded), sum(_rate(rates, *jk) for jk in decoded))


def decode_individual(gains: ChannelGains, state: BackhaulState, params: SystemParams, lambda2: float, rates: FadingRates) -> DecodeOutcome:
    """Successive decoding that may deliver one user's message at a layer."""
    a1, a2, f1, f2, r1, r2 = _sample_regions(gains, state, params, lambda2, rates)
    args = (rates, lambda2, a1, a2, f1, f2, params.power)
    decoded = set()
    if r1:
        decoded |= {(1, 1), (2, 1)}
        if r2:
            decoded |= {(1, 2), (2, 2)}
        else:
            for j in (1, 2):
                if second_layer_single_region(j, "after-both", *args):
                    decoded.add((j, 2))
                    break
    else:
        for j in (1, 2):
            if single_user_layer1_region(j, *args):
                decoded.add((j, 1))
                if second_layer_single_region(j, "after-own", *args):
                    decoded.add((j, 2))
                break
    return DecodeOutcome(frozenset(decoded), sum(_rate(rates, *jk) for jk in decoded))


# --- vectorized evaluation -------------------------------------------------

def _det_poly(m0: HermitianM2, m1: HermitianM2):
    """Coefficients of ``det(m0 + t m1)`` as a quadratic in ``t``."""
    c0 = m0.det()
    c1 = m0.d1 * m1.d2 + m1.d1 * m0.d2 - 2.0 * np.real(m0.off * np.conj(m1.off))
    c2 = m1.det()
    return np.stack(np.broadcast_arrays(c0, c1, c2))


THRESHOLD_NAMES = (
    "joint1_u1", "joint1_u2", "joint1_sum",
    "joint2_u1", "joint2_u2", "joint2_sum",
    "single1_u1", "single1_u2",
    "after_both_u1", "after_both_u2",
    "after_own_u1", "after_own_u2",
)

# Every threshold is log2(num / den) of two determinants. With t = lambda2 and
# F = diag(f1, f2), only five of them vary with t:
#   mix   F + t P(A1 + A2)      own1  F + P A1 + t P A2    own2  F + P A2 + t P A1
#   sol1  F + t P A1            sol2  F + t P A2
# and four are constant: F, F + P(A1 + A2), F + P A1, F + P A2.
_RATIOS = {
    "joint1_u1": ("own1", "mix"),
    "joint1_u2": ("own2", "mix"),
    "joint1_sum": ("full", "mix"),
    "joint2_u1": ("sol1", "noise"),
    "joint2_u2": ("sol2", "noise"),
    "joint2_sum": ("mix", "noise"),
    "single1_u1": ("full", "own2"),
    "single1_u2": ("full", "own1"),
    "after_both_u1": ("mix", "sol2"),
    "after_both_u2": ("mix", "sol1"),
    "after_own_u1": ("own2", "only2"),
    "after_own_u2": ("own1", "only1"),
}


class _ThresholdPolys:
    """Determinants behind every region threshold, as quadratics in ``lambda2``.

    Coefficients are computed once per sample set, so moving ``lambda2``
    costs five quadratic evaluations per realization.
    """

    def __init__(self, a1: HermitianM2, a2: HermitianM2, f1, f2, power: float):
        pa1, pa2 = a1 * power, a2 * power
        both = pa1 + pa2
        diag = HermitianM2.diag(f1, f2)
        self.moving = {
            "mix": _det_poly(diag, both),
            "own1": _det_poly(diag + pa1, pa2),
            "own2": _det_poly(diag + pa2, pa1),
            "sol1": _det_poly(diag, pa1),
            "sol2": _det_poly(diag, pa2),
        }
        self.fixed = {
            "noise": np.asarray(diag.det()),
            "full": np.asarray((diag + both).det()),
            "only1": np.asarray((diag + pa1).det()),
            "only2": np.asarray((diag + pa2).det()),
        }

    def dets(self, lambda2: float) -> dict:
        t = float(lambda2)
        out = dict(self.fixed)
        for name, c in self.moving.items():
            out[name] = c[0] + t * (c[1] + t * c[2])
        return out

    def at(self, lambda2: float) -> dict:
        d = self.dets(lambda2)
        return {
            name: np.maximum(np.log2(d[num] / d[den]), 0.0) for name, (num, den) in _RATIOS.items()
        }


def region_thresholds(a1, a2, f1, f2, power, lambda2) -> dict:
    """All decoding thresholds for (arrays of) realizations at power split ``lambda2``."""
    return _ThresholdPolys(a1, a2, f1, f2, power).at(lambda2)


class _Tests:
    """Rate-versus-threshold comparisons without logarithms: ``r <= log2(n/d)``
    becomes ``2^r d <= n``. A zero rate always meets its (nonnegative) threshold."""

    def __init__(self, dets: dict):
        self.d = dets

    def le(self, rate, name):
        if rate == 0.0:
            return True
        num, den = _RATIOS[name]
        return 2.0**rate * self.d[den] <= self.d[num]

    def gt(self, rate, name):
        if rate == 0.0:
            return False
        num, den = _RATIOS[name]
        return 2.0**rate * self.d[den] > self.d[num]


def _payoff(dets: dict, r11, r21, r12, r22, mode: str):
    """Delivered rate per realization under the given decoding mode."""
    t = _Tests(dets)
    in_r1 = t.le(r11, "joint1_u1") & t.le(r21, "joint1_u2") & t.le(r11 + r21, "joint1_sum")
    in_r2 = t.le(r12, "joint2_u1") & t.le(r22, "joint2_u2") & t.le(r12 + r22, "joint2_sum")
    in_r1 = np.broadcast_to(in_r1, dets["mix"].shape)
    first = r11 + r21
    if mode == "common":
        return np.where(in_r1, first + np.where(in_r2, r12 + r22, 0.0), 0.0)
    if mode != "individual":
        raise ValueError(f"unknown decoding mode {mode!r}")
    in_r3 = t.le(r12, "after_both_u1") & t.gt(r22, "joint2_u2")
    in_r4 = t.le(r22, "after_both_u2") & t.gt(r12, "joint2_u1")
    second = np.where(in_r2, r12 + r22, np.where(in_r3, r12, np.where(in_r4, r22, 0.0)))
    only1 = ~in_r1 & t.le(r11, "single1_u1") & t.gt(r21, "joint1_u2")
    only2 = ~in_r1 & t.le(r21, "single1_u2") & t.gt(r11, "joint1_u1")
    own1 = r11 + np.where(t.le(r12, "after_own_u1"), r12, 0.0)
    own2 = r21 + np.where(t.le(r22, "after_own_u2"), r22, 0.0)
    return np.where(in_r1, first + second, np.where(only1, own1, np.where(only2, own2, 0.0)))


class SampleSet:
    """Fading draws ``start .. start+n-1`` of stream ``seed`` with all backhaul states.

    Arrays carry a leading state axis in the order LL, HL, LH, HH.
    """

    def __init__(self, params: SystemParams, n_samples: int, seed: int, start: int = 0):
        if n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        self.params = params
        self.gains = sample_gains_block(seed, start, n_samples)
        a1, a2 = gain_matrices_fading(self.gains, params.alpha)
        noises = fading_noises(params, self.gains)
        f = [effective_noise(noises, s) for s in BackhaulState]
        f1 = np.stack([x[0] for x in f])
        f2 = np.stack([x[1] for x in f])
        self.a1 = HermitianM2(a1.d1[None], a1.d2[None], a1.off[None])
        self.a2 = HermitianM2(a2.d1[None], a2.d2[None], a2.off[None])
        self.f1, self.f2 = f1, f2
        self.weights = state_probabilities(params.p_low)[:, None]
        self._polys = _ThresholdPolys(self.a1, self.a2, f1, f2, params.power)

    @property
    def n_samples(self) -> int:
        return self.f1.shape[-1]

    def head(self, n: int) -> "SampleSet":
        """The first ``n`` draws, sharing this set's arrays."""
        n = int(min(max(n, 1), self.n_samples))
        sub = object.__new__(SampleSet)
        sub.params, sub.weights = self.params, self.weights
        g = self.gains
        sub.gains = ChannelGains(g.a11[:n], g.a12[:n], g.a21[:n], g.a22[:n])
        sub.a1 = HermitianM2(self.a1.d1[..., :n], self.a1.d2[..., :n], self.a1.off[..., :n])
        sub.a2 = HermitianM2(self.a2.d1[..., :n], self.a2.d2[..., :n], self.a2.off[..., :n])
        sub.f1, sub.f2 = self.f1[..., :n], self.f2[..., :n]
        sub._polys = _ThresholdPolys(sub.a1, sub.a2, sub.f1, sub.f2, self.params.power)
        return sub

    def thresholds(self, lambda2: float) -> dict:
        return self._polys.at(lambda2)

    def per_draw(self, lambda2: float, rates: FadingRates, mode: str) -> np.ndarray:
        """State-averaged delivered rate for every fading draw."""
        pay = _payoff(self._polys.dets(lambda2), *rates.as_tuple(), mode)
        return (self.weights * pay).sum(axis=0)

    def rate_ceiling(self) -> float:
        """Largest single-user rate any draw can support.

        Every per-user threshold is at most the interference-free full-power
        rate ``log2(det(F + P A_j) / det F)``, so larger rates never decode.
        """
        d = self._polys.dets(0.0)
        best = np.maximum(d["only1"], d["only2"]) / d["noise"]
        return float(np.log2(best.max()))

    def estimate(self, lambda2: float, rates: FadingRates, mode: str) -> tuple[float, float]:
        values = self.per_draw(lambda2, rates, mode)
        return _mean_and_error(values)


def _mean_and_error(values: np.ndarray) -> tuple[float, float]:
    n = len(values)
    mean = float(np.mean(values))
    if n < 2:
        return mean, float("nan")
    return mean, float(np.std(values, ddof=1) / np.sqrt(n))


def mc_average_throughput(
    params: SystemParams,
    lambda2: float,
    rates: FadingRates,
    mode: str = "individual",
    n_samples: int = 20000,
    seed: int = 0,
    chunk: int | None = None,
) -> tuple[float, float]:
    """Monte Carlo estimate of the average throughput and its standard error.

    ``chunk`` splits the index range into blocks evaluated separately; the
    result does not depend on it.
    """
    if not 0.0 <= lambda2 <= 1.0:
        raise ValueError(f"lambda2 must lie in [0, 1], got {lambda2}")
    if mode not in DECODING_MODES:
        raise ValueError(f"unknown decoding mode {mode!r}")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    block = n_samples if chunk is None else int(chunk)
    parts = [
        SampleSet(params, min(block, n_samples - start), seed, start).per_draw(lambda2, rates, mode)
        for start in range(0, n_samples, block)
    ]
    return _mean_and_error(np.concatenate(parts))


def rate_ceiling(params: SystemParams) -> float:
    """Upper end of the rate search box."""
    return 2.0 * np.log2(1.0 + 2.0 * params.power)


# Budget shares: initial design, local search on the screening prefix, and
# (the rest) refinement on all draws. One-dimensional searches use a grid
# taking DESIGN_SHARE and refine with the remainder.
DESIGN_SHARE = 0.25
LOCAL_SHARE = 0.25
# screening prefix: 1/SCREEN_FACTOR of the draws, at least SCREEN_MIN
SCREEN_FACTOR = 8
SCREEN_MIN = 1000
SCREEN_STARTS = 6
REFINE_STARTS = 2


@dataclass
class FadingOptimum:
    lambda2: float
    rates: FadingRates
    estimate: float
    std_error: float
    evaluations: float


class _SplitMap:
    """Search coordinate ``u`` in [0, 1] for the power split.

    ``lambda2 = (exp(k u) - 1) / (exp(k) - 1)`` with ``k = ln(1 + P)`` spaces
    the second layer's SNR evenly in decibels, so small splits (where the
    optimum sits at high power) get as much resolution as large ones.
    """

    def __init__(self, power: float):
        self.k = float(np.log1p(power))

    def split(self, u: float) -> float:
        u = float(np.clip(u, 0.0, 1.0))
        if self.k < 1e-12:
            return u
        return float(min(1.0, np.expm1(self.k * u) / np.expm1(self.k)))

    def coord(self, lambda2: float) -> float:
        if self.k < 1e-12:
            return float(lambda2)
        return float(np.log1p(lambda2 * np.expm1(self.k)) / self.k)


def _unpack(point, layers: int, symmetric: bool, smap: _SplitMap) -> tuple[float, FadingRates]:
    if layers == 1:
        return 0.0, FadingRates.symmetric(point[0]) if symmetric else FadingRates(point[0], point[1])
    lam2 = smap.split(point[0])
    if symmetric:
        return lam2, FadingRates.symmetric(point[1], point[2])
    return lam2, FadingRates(point[1], point[2], point[3], point[4])


def pack_point(lambda2: float, rates: FadingRates, layers: int, symmetric: bool, smap: "_SplitMap | None" = None) -> list[float]:
    """Inverse of the optimizer's parameterization, for warm starts."""
    if layers == 1:
        return [rates.r11] if symmetric else [rates.r11, rates.r21]
    u = smap.coord(lambda2) if smap is not None else lambda2
    if symmetric:
        return [u, rates.r11, rates.r12]
    return [u, *rates.as_tuple()]


def _objective(sets: Sequence[SampleSet], layers: int, symmetric: bool, smap: _SplitMap, mode: str):
    """Batched objective: mean throughput over ``sets`` for each search point."""

    def objective(points: np.ndarray) -> np.ndarray:
        out = np.empty(len(points))
        for i, pt in enumerate(points):
            lam2, rates = _unpack(pt, layers, symmetric, smap)
            out[i] = np.mean([np.mean(s.per_draw(lam2, rates, mode)) for s in sets])
        return out

    return objective


def optimize_fading(
    params: SystemParams,
    mode: str = "individual",
    layers: int = 2,
    n_samples: int = 20000,
    seed: int = 0,
    budget: int = 500,
    *,
    symmetric: bool = True,
    initial: Iterable[tuple[float, FadingRates]] = (),
    samples: SampleSet | None = None,
) -> FadingOptimum:
    """Maximize the estimated throughput over the power split and rates.

    Every candidate is scored on the same draws (common random numbers). With
    ``symmetric`` both users share each layer's rate; otherwise all four rates
    are free. ``budget`` counts evaluations on all draws; cheaper evaluations
    on a prefix count fractionally. ``initial`` holds ``(lambda2, rates)`` warm
    starts, e.g. a one-layer optimum when optimizing two layers.
    """
    if samples is None:
        samples = SampleSet(params, n_samples, seed)
    lam2, rates, evals = optimize_shared([samples], mode, layers, budget, symmetric=symmetric, initial=initial)
    est, err = samples.estimate(lam2, rates, mode)
    return FadingOptimum(lam2, rates, est, err, evals)


def optimize_shared(
    sets: Sequence[SampleSet],
    mode: str = "individual",
    layers: int = 2,
    budget: int = 500,
    *,
    symmetric: bool = True,
    initial: Iterable[tuple[float, FadingRates]] = (),
) -> tuple[float, FadingRates, float]:
    """One strategy maximizing the mean throughput over several sample sets.

    Returns ``(lambda2, rates, evaluations)``. A one-dimensional search uses a
    grid; otherwise a dense Halton design is screened on a prefix of the
    draws, the best separated points are polished there, and the two best
    survivors plus the warm starts are refined on all draws.
    """
    if layers not in (1, 2):
        raise ValueError("layers must be 1 or 2")
    if mode not in DECODING_MODES:
        raise ValueError(f"unknown decoding mode {mode!r}")
    if not sets:
        raise ValueError("need at least one sample set")
    # no per-user threshold exceeds the interference-free full-power rate
    ceiling = max(s.rate_ceiling() for s in sets) * (1.0 + 1e-9)
    top = max(min(max(rate_ceiling(s.params) for s in sets), ceiling), 0.0)
    smap = _SplitMap(max(s.params.power for s in sets))
    n_rates = (1 if symmetric else 2) * layers
    lower = [0.0] * (n_rates + (layers == 2))
    upper = ([1.0] if layers == 2 else []) + [top] * n_rates
    dim = len(lower)

    objective = _objective(sets, layers, symmetric, smap, mode)
    starts = [pack_point(l2, r, layers, symmetric, smap) for l2, r in initial]
    if top <= 0.0:
        point, evals = np.zeros(dim), 0.0
    elif dim == 1:
        n_grid = max(3, int(budget * DESIGN_SHARE))
        res = maximize_on_box(
            objective, lower, upper, None, max(1, budget - n_grid), scale="linear",
            points_per_axis=n_grid, min_step=1e-4, starts=3, rotations=1, initial=starts,
        )
        point, evals = res.point, float(res.evaluations)
    else:
        screen = [s.head(max(SCREEN_MIN, s.n_samples // SCREEN_FACTOR)) for s in sets]
        cost = sum(s.n_samples for s in screen) / sum(s.n_samples for s in sets)
        on_screen = _objective(screen, layers, symmetric, smap, mode)
        n_design = max(dim + 1, int(budget * DESIGN_SHARE / cost))
        lo, hi = np.array(lower), np.array(upper)
        design = lo + (hi - lo) * qmc.Halton(d=dim, scramble=False).random(n_design)
        picked = _separated(design, on_screen(design), SCREEN_STARTS, 0.2, np.where(hi > lo, hi - lo, 1.0))
        seeds = [design[i] for i in picked] + starts
        per_seed = max(1, int(budget * LOCAL_SHARE / cost / len(seeds)))
        polished, screen_evals = [], n_design
        for x0 in seeds:
            r = maximize_on_box(
                on_screen, lower, upper, None, per_seed, scale="linear", min_step=1e-3,
                starts=0, rotations=1, design="none", design_points=n_design, initial=[x0],
            )
            polished.append((r.value, list(r.point)))
            screen_evals += r.evaluations
        polished.sort(key=lambda vp: -vp[0])
        finalists = [p for _, p in polished[:REFINE_STARTS]] + starts
        res = maximize_on_box(
            objective, lower, upper, None,
            max(1, int(budget * (1.0 - DESIGN_SHARE - LOCAL_SHARE))),
            scale="linear", min_step=1e-4, starts=0, rotations=1, design="none",
            design_points=n_design, initial=finalists,
        )
        point, evals = res.point, screen_evals * cost + res.evaluations
    lam2, rates = _unpack(np.asarray(point, dtype=float), layers, symmetric, smap)
    return float(lam2), rates, float(evals)
