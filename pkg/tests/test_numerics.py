import numpy as np
import pytest

from robust_uplink.errors import InfeasibleError, NoPositiveRootError, SingularDenominatorError
from robust_uplink.model import HermitianM2, gain_matrices_nf
from robust_uplink.numerics import (
    SCHEMES,
    SchemeMask,
    max_weight_rates,
    max_weight_rates_lp,
    maximize_on_box,
    maximize_on_simplex,
    positive_quadratic_root,
    rate_weights,
    logdet_form,
)


# --- logdet_form -----------------------------------------------------------


def test_logdet_trivial():
    zero = HermitianM2(0.0, 0.0, 0.0)
    assert logdet_form(zero, HermitianM2.identity()) == 0.0
    assert logdet_form(HermitianM2.diag(3.0, 3.0), HermitianM2.identity(), 1.0) == pytest.approx(4.0)


def test_logdet_reference_value():
    a1, a2 = gain_matrices_nf(0.3)
    den = HermitianM2.diag(4.5628178421263406, 4.5628178421263406)
    assert logdet_form((a1 + a2) * 10.0, den, 0.5) == pytest.approx(1.6430936646780543, abs=1e-12)


def test_logdet_singular_denominator():
    with pytest.raises(SingularDenominatorError):
        logdet_form(HermitianM2.identity(), HermitianM2.diag(1.0, 0.0))


def test_logdet_vectorized():
    d = np.array([1.0, 3.0, 7.0])
    out = logdet_form(HermitianM2.diag(d, d), HermitianM2.identity(), 0.5)
    np.testing.assert_allclose(out, np.log2(1 + d))


# --- positive_quadratic_root -----------------------------------------------


@pytest.mark.parametrize(
    "abc, root",
    [
        ((1.0, 0.0, -4.0), 2.0),
        ((15.0, -23.8, -105.61), 3.5628178421263406),
        ((63.0, -23.8, -105.61), 1.4973338509315746),
    ],
)
def test_quadratic_roots(abc, root):
    assert positive_quadratic_root(*abc) == pytest.approx(root, rel=1e-12)


def test_quadratic_root_preconditions():
    with pytest.raises(NoPositiveRootError):
        positive_quadratic_root(1.0, 0.0, 4.0)
    with pytest.raises(NoPositiveRootError):
        positive_quadratic_root(-1.0, 0.0, -4.0)


# --- masks and simplex search ----------------------------------------------


def test_scheme_masks():
    assert SCHEMES["one-layer"] <= SCHEMES["scheme1"] <= SCHEMES["five-layer"]
    assert not SCHEMES["scheme1"] <= SCHEMES["scheme2"]
    assert SCHEMES["three-layer"].indices == [0, 1, 4]
    for bad in ({2}, set(), {1, 6}):
        with pytest.raises(ValueError):
            SchemeMask(frozenset(bad))


def test_simplex_single_layer():
    calls = []

    def f(lams):
        calls.append(lams.copy())
        return lams[:, 0] * 3.0

    res = maximize_on_simplex(f, SCHEMES["one-layer"], 10)
    np.testing.assert_array_equal(res.weights, [1, 0, 0, 0, 0])
    assert res.value == 3.0


def test_simplex_concave_quadratic():
    # maximizer of -(l1 - 0.37)^2 on {l1 + l2 = 1}
    def f(lams):
        return -((lams[:, 0] - 0.37) ** 2) - 0.1 * lams[:, 2:].sum(axis=1)

    res = maximize_on_simplex(f, SCHEMES["scheme2"], 500)
    assert res.weights[0] == pytest.approx(0.37, abs=1e-3)
    assert res.weights[1] == pytest.approx(0.63, abs=1e-3)
    assert np.all(res.weights[2:] == 0.0)
    assert res.value == pytest.approx(f(res.weights[None])[0])


def test_simplex_constant_objective():
    res = maximize_on_simplex(lambda lams: np.full(len(lams), 2.5), SCHEMES["five-layer"], 100)
    assert res.value == 2.5
    assert res.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(res.weights >= 0)


def test_simplex_warm_start_used():
    target = np.array([0.123, 0.0, 0.0, 0.0, 0.877])

    def f(lams):
        return -np.abs(lams - target).sum(axis=1)

    res = maximize_on_simplex(f, SCHEMES["scheme1"], 50, initial=[target])
    assert res.value == pytest.approx(0.0, abs=1e-12)


def test_simplex_rejects_zero_budget():
    with pytest.raises(ValueError):
        maximize_on_simplex(lambda x: x[:, 0], SCHEMES["five-layer"], 0)


# --- box search ------------------------------------------------------------


def test_box_quadratic():
    res = maximize_on_box(lambda x: -((x[:, 0] - 1.0) ** 2), [1e-3], [1e3], budget=500)
    assert res.point[0] == pytest.approx(1.0, abs=1e-6)


def test_box_never_evaluates_infeasible():
    seen = []

    def f(x):
        seen.append(x.copy())
        return -x[:, 0]

    feasible = lambda x: x[:, 0] >= 2.0  # noqa: E731
    res = maximize_on_box(f, [1e-2], [1e2], feasible, budget=200)
    assert np.all(np.concatenate(seen)[:, 0] >= 2.0)
    assert res.point[0] == pytest.approx(2.0, rel=1e-6)


def test_box_infeasible_everywhere():
    with pytest.raises(InfeasibleError):
        maximize_on_box(lambda x: x[:, 0], [1.0], [2.0], lambda x: np.zeros(len(x), bool), budget=10)


def test_box_linear_halton():
    def f(x):
        return -((x[:, 0] - 0.3) ** 2 + (x[:, 1] - 0.7) ** 2 + (x[:, 2] - 0.5) ** 2)

    res = maximize_on_box(f, [0, 0, 0], [1, 1, 1], budget=4000, scale="linear", rotations=2,
                          design="halton", design_points=64, min_step=1e-6)
    np.testing.assert_allclose(res.point, [0.3, 0.7, 0.5], atol=1e-4)


# --- rate selection --------------------------------------------------------


def test_rate_closed_form_branches():
    individual = max_weight_rates([1.0, 1.0, 0.2, 0.3, 1.0, 1.0])
    r = individual.rates
    assert r[0, 2] + r[0, 3] == pytest.approx(0.5)
    pairwise = max_weight_rates([1.0, 1.0, 0.4, 0.4, 0.5, 1.0])
    assert pairwise.rates[0, 2] + pairwise.rates[0, 3] == pytest.approx(0.5)
    assert individual[1, 1] == pytest.approx(0.5)


def test_rate_closed_form_matches_lp():
    rng = np.random.default_rng(1)
    weights = rate_weights(0.3)
    for _ in range(50):
        bounds = rng.uniform(0, 3, 6)
        closed = max_weight_rates(bounds).rates
        _, best = max_weight_rates_lp(bounds, weights)
        assert float((weights * closed).sum()) == pytest.approx(best, abs=1e-9)


def test_rate_weights_reject_nonpositive():
    with pytest.raises(ValueError):
        max_weight_rates(np.ones(6), np.zeros((2, 5)))
