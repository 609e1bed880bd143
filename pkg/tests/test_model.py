import numpy as np
import pytest

from robust_uplink.errors import DegenerateCapacityError, DomainError
from robust_uplink.model import (
    BackhaulState,
    ChannelGains,
    HermitianM2,
    SystemParams,
    check_capacity,
    gain_matrices_fading,
    gain_matrices_nf,
    sample_gains,
    sample_gains_block,
    state_probabilities,
    state_probability,
)


def test_params_domain():
    SystemParams(10.0, 0.3, 1.0, 0.5, 0.1)
    for bad in [dict(power=-1), dict(alpha=1.5), dict(cap_low=-0.1), dict(p_low=2.0), dict(alpha=np.nan)]:
        kw = dict(power=10.0, alpha=0.3, cap_low=1.0, cap_delta=0.5, p_low=0.1) | bad
        with pytest.raises(DomainError):
            SystemParams(**kw)


def test_params_replace_validates():
    p = SystemParams(10.0, 0.3, 1.0, 0.5, 0.1)
    assert p.replace(p_low=0.4).p_low == 0.4
    with pytest.raises(DomainError):
        p.replace(alpha=-0.1)


def test_degenerate_capacity():
    with pytest.raises(DegenerateCapacityError):
        check_capacity(SystemParams(10.0, 0.3, 0.0, 0.0, 0.1))
    with pytest.raises(DegenerateCapacityError):
        check_capacity(SystemParams(10.0, 0.3, 0.0, 1.0, 0.1))


def test_state_probabilities_reference():
    np.testing.assert_allclose(state_probabilities(0.1), [0.01, 0.09, 0.09, 0.81], atol=1e-15)
    np.testing.assert_array_equal(state_probabilities(1.0), [1, 0, 0, 0])
    np.testing.assert_array_equal(state_probabilities(0.0), [0, 0, 0, 1])
    with pytest.raises(DomainError):
        state_probability(BackhaulState.LL, 1.2)


def test_state_helpers():
    p = SystemParams(10.0, 0.3, 1.0, 0.5, 0.1)
    assert BackhaulState.HL.capacities(p) == (1.5, 1.0)
    assert BackhaulState.HL.mirror() is BackhaulState.LH
    assert BackhaulState.HH.mirror() is BackhaulState.HH


def test_gain_matrices_nf():
    a1, a2 = gain_matrices_nf(0.3)
    np.testing.assert_allclose(a1.to_array(), [[1, 0.3], [0.3, 0.09]])
    np.testing.assert_allclose(a2.to_array(), [[0.09, 0.3], [0.3, 1]])
    assert abs(a1.det()) < 1e-15
    z1, z2 = gain_matrices_nf(0.0)
    np.testing.assert_array_equal(z1.to_array(), np.diag([1.0, 0.0]))
    np.testing.assert_array_equal(z2.to_array(), np.diag([0.0, 1.0]))
    with pytest.raises(DomainError):
        gain_matrices_nf(1.1)


def test_gain_matrices_fading_unit_and_phase():
    f1, f2 = gain_matrices_fading(ChannelGains.unit(), 0.3)
    n1, n2 = gain_matrices_nf(0.3)
    np.testing.assert_allclose(f1.to_array(), n1.to_array())
    np.testing.assert_allclose(f2.to_array(), n2.to_array())
    a1, _ = gain_matrices_fading(ChannelGains(1j, 1.0, 1.0, 1.0), 1.0)
    np.testing.assert_allclose(a1.to_array(), [[1, 1j], [-1j, 1]])


def test_gain_matrix_spectrum():
    g = sample_gains(3, 17)
    a1, _ = gain_matrices_fading(g, 0.7)
    ev = np.sort(np.linalg.eigvalsh(a1.to_array()))
    assert ev[0] == pytest.approx(0.0, abs=1e-12)
    assert ev[1] == pytest.approx(abs(g.a11) ** 2 + 0.49 * abs(g.a21) ** 2)


def test_hermitian_ops():
    m = HermitianM2.from_array(np.array([[2.0, 1 - 1j], [1 + 1j, 3.0]]))
    assert m.det() == pytest.approx(4.0)
    assert m.trace() == pytest.approx(5.0)
    np.testing.assert_allclose(m.swap().to_array(), [[3.0, 1 + 1j], [1 - 1j, 2.0]])
    np.testing.assert_allclose((m + HermitianM2.identity()).to_array(), m.to_array() + np.eye(2))


def test_sampler_statistics():
    g = sample_gains_block(0, 0, 1_000_000)
    assert np.mean(np.abs(g.a11) ** 2) == pytest.approx(1.0, abs=0.01)
    assert abs(np.corrcoef(g.a11.real, g.a12.real)[0, 1]) < 0.01
    assert abs(np.mean(g.a11 * np.conj(g.a12))) < 0.01
    assert np.var(g.a21.real) == pytest.approx(0.5, abs=0.01)


def test_sampler_is_counter_based():
    block = sample_gains_block(42, 100, 50)
    single = sample_gains(42, 137)
    assert block[37].a22 == single.a22
    assert sample_gains(42, 137) == single
    assert sample_gains(43, 137) != single
    again = sample_gains_block(42, 0, 150)
    np.testing.assert_array_equal(again.a11[100:], block.a11)


def test_swap_users():
    g = ChannelGains(1.0, 2.0, 3.0, 4.0)
    s = g.swap_users()
    assert (s.a11, s.a12, s.a21, s.a22) == (4.0, 3.0, 2.0, 1.0)
