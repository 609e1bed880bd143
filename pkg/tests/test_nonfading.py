import numpy as np
import pytest

from robust_uplink.errors import DegenerateCapacityError
from robust_uplink.model import HermitianM2, SystemParams, gain_matrices_nf
from robust_uplink.numerics import SCHEMES, RateAssignment, logdet_form
from robust_uplink.nonfading import (
    CompressionNoises,
    achievable_throughput,
    joint_residuals,
    layer_bounds,
    optimize_scheme,
    partial_state_constraints,
    sigma_joint,
    sigma_separate,
    state_throughputs,
    upper_bound,
    upper_bound_terms,
)

BASE = SystemParams(10.0, 0.3, 1.0, 0.5, 0.1)


def test_sigma_separate_reference():
    n = sigma_separate(BASE)
    assert n.sigma2_sq == pytest.approx(11.9 / 7, rel=1e-14)
    assert n.sigma1_sq == pytest.approx(4 * 11.9 / 21, rel=1e-14)
    assert n.coarse == pytest.approx(3.9666666666666677, rel=1e-14)


def test_sigma_separate_edges():
    assert sigma_separate(BASE.replace(cap_delta=0.0)).sigma1_sq == 0.0
    assert sigma_separate(BASE.replace(cap_low=30.0)).sigma2_sq < 1e-15
    with pytest.raises(DegenerateCapacityError):
        sigma_separate(BASE.replace(cap_low=0.0, cap_delta=0.0))


def test_sigma_joint_reference():
    n = sigma_joint(BASE)
    assert n.coarse == pytest.approx(3.5628178421263406, rel=1e-12)
    assert n.sigma2_sq == pytest.approx(1.5494578287193241, rel=1e-12)
    assert n.sigma1_sq == pytest.approx(2.013360013407017, rel=1e-12)
    assert max(abs(r) for r in joint_residuals(BASE, n)) < 1e-10
    assert n.coarse < sigma_separate(BASE).coarse


def test_sigma_joint_symmetric_collapse():
    p = BASE.replace(alpha=0.0)
    s = sigma_joint(p).coarse
    assert 2 * p.cap_low == pytest.approx(np.log2(1 + (p.power + 1) / s), abs=1e-12)


def test_layer_bounds_single_layer_collapse():
    n = sigma_separate(BASE)
    lb = layer_bounds(BASE, [1, 0, 0, 0, 0], n)
    a1, a2 = gain_matrices_nf(0.3)
    d = 1 + n.coarse
    assert lb.c_a == pytest.approx(logdet_form((a1 + a2) * 10.0, HermitianM2.diag(d, d), 0.5), abs=1e-14)
    np.testing.assert_allclose(lb.as_array()[1:], 0.0, atol=1e-15)
    top = layer_bounds(BASE, [0, 0, 0, 0, 1], n)
    d = 1 + n.sigma2_sq
    assert top.c_f == pytest.approx(logdet_form((a1 + a2) * 10.0, HermitianM2.diag(d, d), 0.5), abs=1e-14)
    assert top.c_a == pytest.approx(0.0, abs=1e-15)


def test_layer_bounds_uniform_frozen():
    lb = layer_bounds(BASE, np.full(5, 0.2), sigma_separate(BASE))
    np.testing.assert_allclose(
        lb.as_array(),
        [0.19658429694665308, 0.2566806865781732, 0.18013215345779038,
         0.14048065346538707, 0.3178969999192313, 0.8089291376994683],
        rtol=1e-12,
    )


def test_state_throughputs_counts():
    assert [float(t) for t in state_throughputs(RateAssignment(np.ones((2, 5))))] == [2, 6, 6, 10]
    layer1 = np.zeros((2, 5))
    layer1[:, 0] = 0.7
    np.testing.assert_allclose(state_throughputs(RateAssignment(layer1)), [1.4] * 4)
    assert [float(t) for t in state_throughputs(RateAssignment())] == [0, 0, 0, 0]


def test_average_is_affine_in_states():
    rep = achievable_throughput(BASE, np.full(5, 0.2), "joint")
    p = BASE.p_low
    direct = p * p * rep.t1 + p * (1 - p) * (rep.t2 + rep.t3) + (1 - p) ** 2 * rep.t4
    assert rep.average == pytest.approx(direct, abs=1e-12)
    assert rep.t4 >= rep.t2 >= rep.t1 and rep.t3 >= rep.t1
    assert rep.average == pytest.approx(1.734809067936347, rel=1e-12)


def test_achievable_rejects_bad_split():
    with pytest.raises(ValueError):
        achievable_throughput(BASE, [0.5, 0.5, 0.5, 0, 0])
    with pytest.raises(ValueError):
        achievable_throughput(BASE, [1, 0, 0])


OPTIMA = {
    # scheme: (joint, separate)
    "one-layer": (1.6430936646780543, 1.564334164661355),
    "scheme1": (1.8261383567758278, 1.7690793054171055),
    "scheme2": (1.9235048293395307, 1.8537279202324974),
    "three-layer": (1.929786488174691, 1.8627247967172438),
    "five-layer": (1.9547511975998835, 1.8904153904629015),
}


@pytest.mark.parametrize("scheme", list(SCHEMES))
def test_optimized_schemes_frozen(scheme):
    joint, sep = OPTIMA[scheme]
    assert optimize_scheme(BASE, "joint", scheme).average == pytest.approx(joint, abs=1e-6)
    assert optimize_scheme(BASE, "separate", scheme).average == pytest.approx(sep, abs=1e-6)


def test_one_layer_single_evaluation():
    rep = optimize_scheme(BASE, "joint", "one-layer")
    np.testing.assert_array_equal(rep.lambda_, [1, 0, 0, 0, 0])


def test_upper_bound_reference():
    t = upper_bound_terms(BASE)
    assert t.sigma1_sq == pytest.approx(3.5628178421263406, rel=1e-12)
    assert t.sigma4_sq == pytest.approx(1.4973338509315746, rel=1e-12)
    assert t.t1 == pytest.approx(1.6430936646780543, rel=1e-12)
    assert t.average == pytest.approx(2.202125596546956, abs=1e-6)
    assert np.all(partial_state_constraints(BASE, *t.sigma23_sq) >= -1e-9)
    assert upper_bound(BASE) >= OPTIMA["five-layer"][0]


def test_upper_bound_collapses_without_refinement():
    t = upper_bound_terms(BASE.replace(cap_delta=0.0))
    assert t.sigma4_sq == pytest.approx(t.sigma1_sq, rel=1e-12)
    assert t.t3 == pytest.approx(t.t1, rel=1e-12)
    assert t.t2 == pytest.approx(t.t1, abs=1e-6)


def test_upper_bound_decoupled_cells():
    # alpha = 0: each link compresses its own cell, constraints decouple
    p = BASE.replace(alpha=0.0)
    t = upper_bound_terms(p)
    k = p.power + 1
    x_hi, y_lo = t.sigma23_sq
    assert 0.5 * np.log2(k / x_hi + 1) == pytest.approx(p.cap_low + p.cap_delta, abs=1e-6)
    assert 0.5 * np.log2(k / y_lo + 1) == pytest.approx(p.cap_low, abs=1e-6)


def test_joint_vs_separate_variances():
    for alpha in (0.0, 0.2, 0.6, 1.0):
        p = BASE.replace(alpha=alpha)
        sep, joint = sigma_separate(p), sigma_joint(p)
        assert joint.coarse <= sep.coarse + 1e-12
        assert joint.sigma2_sq <= sep.sigma2_sq + 1e-12


def test_compression_noises_value_type():
    n = CompressionNoises(1.0, 2.0)
    assert n.coarse == 3.0
