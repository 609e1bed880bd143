"""System model: parameters, backhaul states, channel gains and gain matrices.

Power is linear throughout. Entries of :class:`HermitianM2` and
:class:`ChannelGains` may be scalars or broadcastable numpy arrays, which is
how the Monte Carlo code evaluates many realizations at once.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCapacityError, DomainError

__all__ = [
    "SystemParams",
    "BackhaulState",
    "ChannelGains",
    "HermitianM2",
    "gain_matrices_nf",
    "gain_matrices_fading",
    "sample_gains",
    "sample_gains_block",
    "state_probability",
    "state_probabilities",
    "check_capacity",
]


@dataclass(frozen=True)
class SystemParams:
    """Two-cell uplink with two-state backhaul links.

    Attributes
    ----------
    power : float
        Per-user transmit power (linear).
    alpha : float
        Inter-cell interference coefficient in [0, 1].
    cap_low : float
        Backhaul capacity in the low state, bits per channel use.
    cap_delta : float
        Extra capacity of the high state, bits per channel use.
    p_low : float
        Probability that a link is in the low state.
    """

    power: float
    alpha: float
    cap_low: float
    cap_delta: float
    p_low: float

    def __post_init__(self):
        for name in ("power", "alpha", "cap_low", "cap_delta", "p_low"):
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise DomainError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if self.power < 0:
            raise DomainError(f"power must be >= 0, got {self.power}")
        if not 0.0 <= self.alpha <= 1.0:
            raise DomainError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.cap_low < 0 or self.cap_delta < 0:
            raise DomainError("backhaul capacities must be >= 0")
        if not 0.0 <= self.p_low <= 1.0:
            raise DomainError(f"p_low must lie in [0, 1], got {self.p_low}")

    def replace(self, **changes) -> "SystemParams":
        fields = dict(
            power=self.power,
            alpha=self.alpha,
            cap_low=self.cap_low,
            cap_delta=self.cap_delta,
            p_low=self.p_low,
        )
        fields.update(changes)
        return SystemParams(**fields)


def check_capacity(params: SystemParams) -> None:
    """Reject capacities that make a compression noise infinite."""
    if params.cap_low <= 0.0:
        if params.cap_delta <= 0.0:
            raise DegenerateCapacityError("C = dC = 0: compression noise is infinite")
        raise DegenerateCapacityError(
            "C = 0 with dC > 0: the coarse description carries no information"
        )


class BackhaulState(enum.Enum):
    """Joint state of the two backhaul links, in the order LL, HL, LH, HH."""

    LL = (False, False)
    HL = (True, False)
    LH = (False, True)
    HH = (True, True)

    @property
    def high1(self) -> bool:
        return self.value[0]

    @property
    def high2(self) -> bool:
        return self.value[1]

    def capacities(self, params: SystemParams) -> tuple[float, float]:
        high = params.cap_low + params.cap_delta
        return (
            high if self.high1 else params.cap_low,
            high if self.high2 else params.cap_low,
        )

    def mirror(self) -> "BackhaulState":
        return BackhaulState((self.high2, self.high1))


def state_probability(state: BackhaulState, p_low: float) -> float:
    if not 0.0 <= p_low <= 1.0:
        raise DomainError(f"p_low must lie in [0, 1], got {p_low}")
    q = 1.0 - p_low
    return (q if state.high1 else p_low) * (q if state.high2 else p_low)


def state_probabilities(p_low: float) -> np.ndarray:
    """Probabilities of (LL, HL, LH, HH)."""
    return np.array([state_probability(s, p_low) for s in BackhaulState])


@dataclass(frozen=True)
class ChannelGains:
    """Gains ``a_jk`` from user ``k`` to base station ``j``."""

    a11: complex
    a12: complex
    a21: complex
    a22: complex

    def __post_init__(self):
        for name in ("a11", "a12", "a21", "a22"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise DomainError(f"gain {name} is not finite")

    @classmethod
    def unit(cls) -> "ChannelGains":
        return cls(1.0, 1.0, 1.0, 1.0)

    def swap_users(self) -> "ChannelGains":
        """Relabel users and base stations simultaneously."""
        return ChannelGains(self.a22, self.a21, self.a12, self.a11)

    def __getitem__(self, index) -> "ChannelGains":
        return ChannelGains(
            self.a11[index], self.a12[index], self.a21[index], self.a22[index]
        )

    def __len__(self) -> int:
        return int(np.size(self.a11))


@dataclass(frozen=True)
class HermitianM2:
    """2x2 Hermitian matrix ``[[d1, off], [conj(off), d2]]``."""

    d1: float
    d2: float
    off: complex = 0.0

    @classmethod
    def identity(cls) -> "HermitianM2":
        return cls(1.0, 1.0, 0.0)

    @classmethod
    def diag(cls, d1, d2) -> "HermitianM2":
        return cls(d1, d2, 0.0)

    @classmethod
    def from_array(cls, m) -> "HermitianM2":
        m = np.asarray(m)
        if not np.allclose(m, np.conj(m.T)):
            raise DomainError("matrix is not Hermitian")
        return cls(float(np.real(m[0, 0])), float(np.real(m[1, 1])), m[0, 1])

    def __add__(self, other: "HermitianM2") -> "HermitianM2":
        return HermitianM2(self.d1 + other.d1, self.d2 + other.d2, self.off + other.off)

    def __mul__(self, scale) -> "HermitianM2":
        return HermitianM2(scale * self.d1, scale * self.d2, scale * self.off)

    __rmul__ = __mul__

    def det(self):
        return self.d1 * self.d2 - np.abs(self.off) ** 2

    def trace(self):
        return self.d1 + self.d2

    def eigvalsh(self):
        """Eigenvalues ``(smaller, larger)``."""
        mid = 0.5 * (self.d1 + self.d2)
        rad = np.sqrt(0.25 * (self.d1 - self.d2) ** 2 + np.abs(self.off) ** 2)
        return mid - rad, mid + rad

    def swap(self) -> "HermitianM2":
        """Conjugate by the index permutation (1 2)."""
        return HermitianM2(self.d2, self.d1, np.conj(self.off))

    def to_array(self) -> np.ndarray:
        off = complex(self.off)
        if off.imag == 0.0:
            return np.array([[self.d1, off.real], [off.real, self.d2]], dtype=float)
        return np.array([[self.d1, off], [off.conjugate(), self.d2]], dtype=complex)


def gain_matrices_nf(alpha: float) -> tuple[HermitianM2, HermitianM2]:
    """Rank-one gain matrices of the two users with unit channel gains."""
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"alpha must lie in [0, 1], got {alpha}")
    a1 = HermitianM2(1.0, alpha * alpha, alpha)
    a2 = HermitianM2(alpha * alpha, 1.0, alpha)
    return a1, a2


def gain_matrices_fading(g: ChannelGains, alpha: float) -> tuple[HermitianM2, HermitianM2]:
    """Outer products of the users' channel vectors ``(a11, alpha a21)`` and ``(alpha a12, a22)``."""
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"alpha must lie in [0, 1], got {alpha}")
    a1 = HermitianM2(
        np.abs(g.a11) ** 2,
        alpha**2 * np.abs(g.a21) ** 2,
        alpha * g.a11 * np.conj(g.a21),
    )
    a2 = HermitianM2(
        alpha**2 * np.abs(g.a12) ** 2,
        np.abs(g.a22) ** 2,
        alpha * g.a12 * np.conj(g.a22),
    )
    return a1, a2


# Philox emits four 64-bit words per counter step; each sample uses eight
# words (two uniforms per complex gain), i.e. two counter steps.
_WORDS_PER_SAMPLE = 8
_STEPS_PER_SAMPLE = 2


def _uniforms(seed: int, start: int, count: int) -> np.ndarray:
    bitgen = np.random.Philox(key=int(seed), counter=_STEPS_PER_SAMPLE * int(start))
    raw = bitgen.random_raw(_WORDS_PER_SAMPLE * int(count))
    # 53-bit mantissa in (0, 1]; excludes 0 so the logarithm below is finite
    return ((raw >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53


def sample_gains_block(seed: int, start: int, count: int) -> ChannelGains:
    """Gains for sample indices ``start .. start+count-1`` of stream ``seed``.

    Sample ``i`` depends only on ``(seed, i)``, so any partition of an index
    range yields the same gains.
    """
    if start < 0 or count < 0:
        raise DomainError("sample indices must be nonnegative")
    u = _uniforms(seed, start, count).reshape(count, 4, 2)
    # Box-Muller with radius sqrt(-ln u): CN(0, 1), E|a|^2 = 1
    radius = np.sqrt(-np.log(u[..., 0]))
    phase = 2.0 * np.pi * u[..., 1]
    a = radius * (np.cos(phase) + 1j * np.sin(phase))
    return ChannelGains(a[:, 0], a[:, 1], a[:, 2], a[:, 3])


def sample_gains(seed: int, index: int) -> ChannelGains:
    block = sample_gains_block(seed, index, 1)
    return ChannelGains(
        complex(block.a11[0]), complex(block.a12[0]), complex(block.a21[0]), complex(block.a22[0])
    )
