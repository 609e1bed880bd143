"""Independent verification by direct Gaussian mutual-information computation.

Every variable of interest (code layers, received and compressed signals,
compression noises) is written as a linear map of independent Gaussian
sources, so the joint covariance is ``M diag(v) M^H``. Rate thresholds are then
recomputed as conditional mutual informations and compared against the closed
forms in :mod:`nonfading` and :mod:`fading`.

Labels: ``W{j}{k}`` code layer ``k`` of user ``j``, ``Y{j}`` received signal at
base station ``j``, ``V{j}{l}`` its coarse (l=1) or refined (l=2) description,
``Q{j}{l}`` compression noise.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import SingularCovarianceError
from .fading import FadingNoises, fading_noises, region_thresholds, effective_noise
from .model import BackhaulState, ChannelGains, SystemParams, gain_matrices_fading
from .nonfading import (
    CompressionNoises,
    joint_residuals,
    layer_bounds,
    sigma_joint,
    sigma_separate,
)

__all__ = [
    "JointGaussian",
    "Check",
    "OracleReport",
    "assemble_nf",
    "assemble_fading",
    "gaussian_mi",
    "conditional_cov",
    "verify_prop1",
    "verify_backhaul",
    "verify_fading_regions",
    "sample_covariance_check",
    "random_nf_case",
    "random_fading_case",
]

JITTER = 1e-12
TOLERANCE = 1e-9


@dataclass(frozen=True)
class JointGaussian:
    """Zero-mean (real or circular complex) Gaussian vector with named entries."""

    labels: tuple
    cov: np.ndarray
    complex_valued: bool = False
    mixing: np.ndarray | None = field(default=None, repr=False, compare=False)
    source_var: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        cov = np.asarray(self.cov)
        n = len(self.labels)
        if cov.shape != (n, n):
            raise ValueError(f"covariance shape {cov.shape} does not match {n} labels")
        if len(set(self.labels)) != n:
            raise ValueError("labels must be unique")
        if not np.allclose(cov, cov.conj().T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
            raise ValueError("covariance is not Hermitian")
        lo = np.linalg.eigvalsh(cov).min()
        if lo < -1e-9 * np.real(np.trace(cov)):
            raise ValueError(f"covariance is not PSD (min eigenvalue {lo:.3e})")
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "cov", cov)
        if self.mixing is None:
            # square-root factor with a PD floor stands in for the source map
            chol = np.linalg.cholesky(cov + JITTER * max(1.0, np.abs(cov).max()) * np.eye(n))
            object.__setattr__(self, "mixing", chol)
            object.__setattr__(self, "source_var", np.ones(n))

    def factor(self, names: Sequence[str]) -> np.ndarray:
        """Rows ``L`` with ``L L^H`` equal to the covariance of ``names``."""
        return self.mixing[self.index(names)] * np.sqrt(self.source_var)

    def index(self, names: Iterable[str]) -> list[int]:
        pos = {name: i for i, name in enumerate(self.labels)}
        try:
            return [pos[name] for name in names]
        except KeyError as exc:
            raise KeyError(f"unknown label {exc.args[0]!r}") from None

    def block(self, rows, cols) -> np.ndarray:
        return self.cov[np.ix_(self.index(rows), self.index(cols))]

    def entry(self, a: str, b: str):
        return self.block([a], [b])[0, 0]


def _from_mixing(labels, mixing, source_var, complex_valued) -> JointGaussian:
    m = np.asarray(mixing)
    cov = (m * source_var) @ m.conj().T
    if not complex_valued:
        cov = np.real(cov)
    return JointGaussian(tuple(labels), cov, complex_valued, m, np.asarray(source_var, dtype=float))


def _assemble(h, lam_vec, n_layers, power, q_vars, complex_valued) -> JointGaussian:
    """Shared builder. ``h[j][u]`` is the gain from user ``u`` to base station ``j``."""
    w_names = [f"W{j}{k}" for j in (1, 2) for k in range(1, n_layers + 1)]
    src = w_names + ["Z1", "Z2"] + [f"Q{j}{l}" for j in (1, 2) for l in (1, 2)]
    var = np.array([1.0] * len(w_names) + [1.0, 1.0] + list(q_vars), dtype=float)
    col = {s: i for i, s in enumerate(src)}
    dtype = complex if complex_valued else float
    amp = np.sqrt(power * np.asarray(lam_vec, dtype=float))

    rows, labels = [], []

    def unit(name):
        r = np.zeros(len(src), dtype=dtype)
        r[col[name]] = 1.0
        return r

    for name in w_names:
        rows.append(unit(name))
        labels.append(name)
    y = {}
    for j in (1, 2):
        r = unit(f"Z{j}")
        for u in (1, 2):
            for k in range(n_layers):
                r[col[f"W{u}{k + 1}"]] += h[j - 1][u - 1] * amp[k]
        y[j] = r
        rows.append(r)
        labels.append(f"Y{j}")
    for j in (1, 2):
        refined = y[j] + unit(f"Q{j}2")
        rows.append(refined + unit(f"Q{j}1"))
        labels.append(f"V{j}1")
        rows.append(refined)
        labels.append(f"V{j}2")
    for j in (1, 2):
        for l in (1, 2):
            rows.append(unit(f"Q{j}{l}"))
            labels.append(f"Q{j}{l}")
    return _from_mixing(labels, np.array(rows), var, complex_valued)


def assemble_nf(params: SystemParams, lam, noises: CompressionNoises) -> JointGaussian:
    """Real five-layer model with unit direct gains and cross gain ``alpha``."""
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (5,):
        raise ValueError("lam must have five entries")
    a = params.alpha
    h = [[1.0, a], [a, 1.0]]
    q = [noises.sigma1_sq, noises.sigma2_sq] * 2
    return _assemble(h, lam, 5, params.power, q, complex_valued=False)


def assemble_fading(params: SystemParams, gains: ChannelGains, lambda2: float, noises: FadingNoises | None = None) -> JointGaussian:
    """Complex two-layer model for one fading realization."""
    if noises is None:
        noises = fading_noises(params, gains)
    a = params.alpha
    g = [complex(gains.a11), complex(gains.a12), complex(gains.a21), complex(gains.a22)]
    h = [[g[0], a * g[1]], [a * g[2], g[3]]]
    q = [noises.sigma11_sq, noises.sigma12_sq, noises.sigma21_sq, noises.sigma22_sq]
    return _assemble(h, [1.0 - lambda2, lambda2], 2, params.power, q, complex_valued=True)


def _span(rows: np.ndarray) -> np.ndarray:
    """Orthonormal columns spanning the row space of ``rows``.

    Dependent rows (e.g. a zero-variance quantization noise) add nothing and
    are dropped.
    """
    m = rows.conj().T
    q, r = np.linalg.qr(m)
    d = np.abs(np.diag(r))
    if d.size and d.min() > np.sqrt(JITTER) * max(1.0, d.max()):
        return q
    u, sv, _ = np.linalg.svd(m, full_matrices=False)
    return u[:, sv > np.sqrt(JITTER) * max(1.0, float(sv.max(initial=0.0)))]


def _project_off(rows: np.ndarray, basis_rows: np.ndarray) -> np.ndarray:
    if basis_rows.shape[0] == 0:
        return rows
    q = _span(basis_rows)
    return rows - (rows @ q) @ q.conj().T


def _residual(jg: JointGaussian, target: Sequence[str], given: Sequence[str]) -> np.ndarray:
    """Square-root factor of the conditional covariance of ``target`` given ``given``.

    Projects the target rows off the span of the conditioning rows; this
    avoids forming and inverting nearly collinear covariance blocks.
    """
    return _project_off(jg.factor(target), jg.factor(given))


def _logdet2(rows: np.ndarray) -> float:
    """``log2 det(rows rows^H)``."""
    if rows.shape[0] == 0:
        return 0.0
    r = np.linalg.qr(rows.conj().T, mode="r")
    d = np.abs(np.diag(r))
    scale = max(1.0, float(np.linalg.norm(rows, axis=1).max()))
    if d.min() <= np.sqrt(JITTER) * scale:
        raise SingularCovarianceError(f"conditional covariance is singular (pivot {d.min():.3e})")
    return float(2.0 * np.sum(np.log2(d)))


def conditional_cov(jg: JointGaussian, target: Sequence[str], given: Sequence[str] = ()) -> np.ndarray:
    r = _residual(jg, target, given)
    return r @ r.conj().T


def gaussian_mi(jg: JointGaussian, a: Sequence[str], b: Sequence[str], given: Sequence[str] = (), scale: float | None = None) -> float:
    """``I(A; B | given)`` in bits.

    ``scale`` defaults to 1/2 for real and 1 for complex vectors.
    """
    a, b, given = list(a), list(b), list(given)
    if set(a) & set(b) or set(a) & set(given) or set(b) & set(given):
        raise ValueError("label sets must be disjoint")
    if not a or not b:
        return 0.0
    if scale is None:
        scale = 1.0 if jg.complex_valued else 0.5
    res = _residual(jg, a + b, given)
    ra, rb = res[: len(a)], res[len(a):]
    floor = np.sqrt(JITTER) * max(1.0, float(np.abs(jg.factor(a + b)).max()))
    if np.abs(ra).max() <= floor or np.abs(rb).max() <= floor:
        # one side is a function of the conditioning set
        return 0.0
    # h(A | C) - h(A | B, C); the other side if A alone is degenerate
    try:
        value = _logdet2(ra) - _logdet2(_project_off(ra, rb))
    except SingularCovarianceError:
        value = _logdet2(rb) - _logdet2(_project_off(rb, ra))
    return scale * value


@dataclass
class Check:
    name: str
    closed_form: float
    oracle: float
    tolerance: float = TOLERANCE
    flagged: bool = False

    @property
    def deviation(self) -> float:
        return abs(self.closed_form - self.oracle)

    @property
    def passed(self) -> bool:
        return bool(self.deviation <= self.tolerance)


@dataclass
class OracleReport:
    checks: list = field(default_factory=list)
    context: dict = field(default_factory=dict)

    def add(self, *args, **kwargs) -> Check:
        check = Check(*args, **kwargs)
        self.checks.append(check)
        return check

    def extend(self, other: "OracleReport") -> "OracleReport":
        self.checks.extend(other.checks)
        return self

    @property
    def enforced(self) -> list:
        return [c for c in self.checks if not c.flagged]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.enforced)

    @property
    def max_deviation(self) -> float:
        return max((c.deviation for c in self.enforced), default=0.0)

    def failures(self) -> list:
        return [c for c in self.enforced if not c.passed]

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "max_deviation": self.max_deviation,
            "context": self.context,
            "checks": [dict(asdict(c), deviation=c.deviation, passed=c.passed) for c in self.checks],
        }


def _w(users, layers) -> list[str]:
    return [f"W{j}{k}" for j in users for k in layers]


def _scaled(noises, factor: float):
    """Noise variances multiplied by ``factor`` (sensitivity injection)."""
    if factor == 1.0:
        return noises
    return replace(noises, **{k: v * factor for k, v in asdict(noises).items()})


def verify_prop1(
    params: SystemParams, lam, noises: CompressionNoises | None = None, mode: str = "separate", *, perturb: float = 0.0
) -> OracleReport:
    """Recompute the six layer bounds as mutual informations.

    Each decoder conditions on every layer it has already recovered. For the
    all-high state two variants are reported: conditioning on layers 1-4
    (enforced) and conditioning on layers 3-4 only (flagged, informational).
    ``perturb`` scales the oracle's noise variances by ``1 + perturb`` to
    confirm the comparison is sensitive.
    """
    if noises is None:
        noises = sigma_separate(params) if mode == "separate" else sigma_joint(params)
    lam = np.asarray(lam, dtype=float)
    jg = assemble_nf(params, lam, _scaled(noises, 1.0 + perturb))
    cf = layer_bounds(params, lam, noises)
    rep = OracleReport(context={"params": asdict(params), "lambda": lam.tolist(), "mode": mode})

    low = ["V11", "V21"]
    rep.add("a", float(cf.c_a), gaussian_mi(jg, _w((1, 2), [1]), low))
    for j in (1, 2):
        o = 3 - j
        # state with link j high: the decoder sees V_j2 and V_o1
        v = [f"V{j}2", f"V{o}1"]
        first = _w((1, 2), [1])
        second = _w((1, 2), [2])
        rep.add(f"b[{j}]", float(cf.c_b), gaussian_mi(jg, second, v, first))
        known = first + second
        rep.add(f"c[{j}]", float(cf.c_c), gaussian_mi(jg, [f"W{j}3"], v, known + [f"W{o}4"]))
        rep.add(f"d[{j}]", float(cf.c_d), gaussian_mi(jg, [f"W{o}4"], v, known + [f"W{j}3"]))
        rep.add(f"e[{j}]", float(cf.c_e), gaussian_mi(jg, [f"W{j}3", f"W{o}4"], v, known))
    high = ["V12", "V22"]
    rep.add("f", float(cf.c_f), gaussian_mi(jg, _w((1, 2), [5]), high, _w((1, 2), [1, 2, 3, 4])))
    rep.add(
        "f[layers 3-4 known]",
        float(cf.c_f),
        gaussian_mi(jg, _w((1, 2), [1, 2, 5]), high, _w((1, 2), [3, 4])),
        flagged=True,
    )
    return rep


def verify_backhaul(
    params: SystemParams, tol_separate: float = 1e-9, tol_joint: float = 1e-8, *, perturb: float = 0.0
) -> OracleReport:
    """Backhaul rate identities for both decompression modes."""
    rep = OracleReport(context={"params": asdict(params)})
    lam = np.full(5, 0.2)
    sep = sigma_separate(params)
    jg = assemble_nf(params, lam, _scaled(sep, 1.0 + perturb))
    for j in (1, 2):
        rep.add(f"separate I(Y{j};V{j}1)", params.cap_low, gaussian_mi(jg, [f"Y{j}"], [f"V{j}1"]), tol_separate)
        rep.add(
            f"separate I(Y{j};V{j}2|V{j}1)",
            params.cap_delta,
            gaussian_mi(jg, [f"Y{j}"], [f"V{j}2"], [f"V{j}1"]),
            tol_separate,
        )
        whole = gaussian_mi(jg, [f"Y{j}"], [f"V{j}1", f"V{j}2"])
        parts = gaussian_mi(jg, [f"Y{j}"], [f"V{j}1"]) + gaussian_mi(jg, [f"Y{j}"], [f"V{j}2"], [f"V{j}1"])
        rep.add(f"chain rule Y{j}", whole, parts, 1e-10)

    joint = sigma_joint(params)
    jj = assemble_nf(params, lam, _scaled(joint, 1.0 + perturb))
    # V11, V21 are conditionally independent given (Y1, Y2), so the entropy
    # expression reduces to I(Y1, Y2; V11, V21)
    rep.add("joint sum rate", 2.0 * params.cap_low, gaussian_mi(jj, ["Y1", "Y2"], ["V11", "V21"]), tol_joint)
    for j in (1, 2):
        rep.add(
            f"joint I(Y{j};V{j}2|V{j}1)",
            params.cap_delta,
            gaussian_mi(jj, [f"Y{j}"], [f"V{j}2"], [f"V{j}1"]),
            tol_joint,
        )
    r_sum, r_ref = joint_residuals(params, joint)
    rep.add("joint closed-form residual (sum)", 0.0, float(r_sum), tol_joint)
    rep.add("joint closed-form residual (refine)", 0.0, float(r_ref), tol_joint)
    return rep


def _fading_mis(jg: JointGaussian, v: list[str]) -> dict:
    mi = lambda a, c=(): gaussian_mi(jg, a, v, c)  # noqa: E731
    return {
        "joint1_u1": mi(["W11"], ["W21"]),
        "joint1_u2": mi(["W21"], ["W11"]),
        "joint1_sum": mi(["W11", "W21"]),
        # X_1 given (W11, X2) carries only W12, and so on
        "joint2_u1": mi(["W12"], ["W11", "W21", "W22"]),
        "joint2_u2": mi(["W22"], ["W11", "W21", "W12"]),
        "joint2_sum": mi(["W12", "W22"], ["W11", "W21"]),
        "single1_u1": mi(["W11"]),
        "single1_u2": mi(["W21"]),
        "after_both_u1": mi(["W12"], ["W11", "W21"]),
        "after_both_u2": mi(["W22"], ["W11", "W21"]),
        "after_own_u1": mi(["W12"], ["W11"]),
        "after_own_u2": mi(["W22"], ["W21"]),
    }


def verify_fading_regions(
    params: SystemParams, gains: ChannelGains, state: BackhaulState, lambda2: float, *, perturb: float = 0.0
) -> OracleReport:
    """Compare every fading decoding threshold against its mutual information."""
    noises = fading_noises(params, gains)
    jg = assemble_fading(params, gains, lambda2, _scaled(noises, 1.0 + perturb))
    v = [f"V1{2 if state.high1 else 1}", f"V2{2 if state.high2 else 1}"]
    a1, a2 = gain_matrices_fading(gains, params.alpha)
    f1, f2 = effective_noise(noises, state)
    closed = region_thresholds(a1, a2, f1, f2, params.power, lambda2)
    rep = OracleReport(context={"params": asdict(params), "state": state.name, "lambda2": float(lambda2)})
    for name, value in _fading_mis(jg, v).items():
        rep.add(name, float(closed[name]), value)
    return rep


def sample_covariance_check(params: SystemParams, lam, n_samples: int = 100_000, seed: int = 0, noises: CompressionNoises | None = None) -> OracleReport:
    """Empirical covariance of drawn vectors against the analytic one.

    Deviations are normalized by ``sqrt(C_ii C_jj)`` and must stay below
    ``5 / sqrt(n_samples)``; empirical means likewise (normalized by ``sqrt(C_ii)``).
    """
    if noises is None:
        noises = sigma_separate(params)
    jg = assemble_nf(params, lam, noises)
    rng = np.random.default_rng(seed)
    sources = rng.standard_normal((n_samples, len(jg.source_var))) * np.sqrt(jg.source_var)
    draws = sources @ jg.mixing.T
    emp = draws.T @ draws / n_samples
    sd = np.sqrt(np.diag(jg.cov))
    norm = np.outer(sd, sd)
    tol = 5.0 / np.sqrt(n_samples)
    rep = OracleReport(context={"n_samples": n_samples, "seed": seed})
    rep.add("covariance", 0.0, float(np.max(np.abs(emp - jg.cov) / norm)), tol)
    rep.add("mean", 0.0, float(np.max(np.abs(draws.mean(axis=0)) / sd)), tol)
    return rep


def random_nf_case(rng: np.random.Generator) -> tuple[SystemParams, np.ndarray]:
    """A random parameter set and power split covering the model's domain."""
    params = SystemParams(
        power=10 ** rng.uniform(-1.0, 3.0),
        alpha=rng.uniform(0.0, 1.0),
        cap_low=rng.uniform(0.1, 5.0),
        cap_delta=rng.uniform(0.0, 5.0),
        p_low=rng.uniform(0.0, 1.0),
    )
    lam = rng.dirichlet(np.ones(5))
    return params, lam


def random_fading_case(rng: np.random.Generator) -> tuple[SystemParams, ChannelGains, float]:
    params = SystemParams(
        power=10 ** rng.uniform(-1.0, 3.0),
        alpha=rng.uniform(0.0, 1.0),
        cap_low=rng.uniform(0.1, 6.0),
        cap_delta=rng.uniform(0.0, 6.0),
        p_low=rng.uniform(0.0, 1.0),
    )
    z = (rng.standard_normal(4) + 1j * rng.standard_normal(4)) / np.sqrt(2.0)
    return params, ChannelGains(*z), float(rng.uniform(0.0, 1.0))
