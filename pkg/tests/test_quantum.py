import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bellselect import quantum as qc
from bellselect.quantum import BellLabel

import oracles

H = 1 / math.sqrt(2)
angles = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)
labels = st.sampled_from(list(BellLabel))


def test_bell_state_amplitudes():
    np.testing.assert_allclose(qc.bell_state("C0").amplitudes, [0, H, -H, 0])
    np.testing.assert_allclose(qc.bell_state("C1").amplitudes, [H, 0, 0, H])
    np.testing.assert_allclose(qc.bell_state(BellLabel.PHI_MINUS).amplitudes, [H, 0, 0, -H])
    np.testing.assert_allclose(qc.bell_state(3).amplitudes, [0, H, H, 0])


@pytest.mark.parametrize("label", list(BellLabel))
def test_bell_state_normalized(label):
    assert qc.bell_state(label).norm() == pytest.approx(1.0, abs=1e-15)


def test_label_parsing():
    assert BellLabel.parse("psi_minus") is BellLabel.C0
    assert BellLabel.parse("c2") is BellLabel.C2
    assert str(BellLabel.C3) == "C3"
    with pytest.raises(ValueError):
        BellLabel.parse("C4")


def test_pure_state_rejects_bad_input():
    with pytest.raises(ValueError):
        qc.PureState([1.0, 1.0])
    with pytest.raises(ValueError):
        qc.PureState([1.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        qc.PureState(np.ones(32) / math.sqrt(32))


def test_tensor_of_basis_states():
    out = qc.tensor(qc.basis_state("0"), qc.basis_state("0"))
    np.testing.assert_allclose(out.amplitudes, [1, 0, 0, 0])


def test_tensor_singlets_hand_expansion():
    # (|01> - |10>)(|01> - |10>)/2 = (|0101> - |0110> - |1001> + |1010>)/2
    amps = qc.tensor(qc.bell_state("C0"), qc.bell_state("C0")).amplitudes
    expected = np.zeros(16)
    expected[0b0101], expected[0b0110], expected[0b1001], expected[0b1010] = 0.5, -0.5, -0.5, 0.5
    np.testing.assert_allclose(amps, expected, atol=1e-15)
    assert np.vdot(amps, amps).real == pytest.approx(1.0, abs=1e-12)


def test_tensor_size_overflow():
    with pytest.raises(ValueError):
        qc.tensor(qc.tensor(qc.bell_state(0), qc.bell_state(0)), qc.basis_state("0"))


def test_outcome_probabilities_examples():
    assert qc.outcome_probabilities(qc.basis_state("0"), 0, 0.0) == pytest.approx((1.0, 0.0))
    assert qc.outcome_probabilities(qc.basis_state("0"), 0, math.pi / 2) == pytest.approx((0.5, 0.5))
    with pytest.raises(ValueError):
        qc.outcome_probabilities(qc.basis_state("0"), 1, 0.0)


@given(angles)
def test_singlet_reduced_state_is_maximally_mixed(theta):
    psi = qc.bell_state("C0")
    for qubit in (0, 1):
        brute = oracles.single(psi.amplitudes, 2, qubit, qc.normalize_angle(theta), 1)
        assert brute == pytest.approx(0.5, abs=1e-12)
        assert qc.outcome_probabilities(psi, qubit, theta) == pytest.approx((0.5, 0.5), abs=1e-12)


def test_measure_singlet_first_qubit():
    outcome, post = qc.measure_qubit(qc.bell_state("C0"), 0, 0.0, 0.3)
    assert outcome == 1
    assert post.fidelity(qc.basis_state("01")) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("u", [0.0, 0.4, 0.999])
def test_measure_eigenstate_unchanged(u):
    outcome, post = qc.measure_qubit(qc.basis_state("0"), 0, 0.0, u)
    assert outcome == 1
    assert post.fidelity(qc.basis_state("0")) == pytest.approx(1.0)


def test_measure_qubit_is_deterministic():
    psi = qc.bell_state("C2")
    assert qc.measure_qubit(psi, 1, 1.1, 0.77)[0] == qc.measure_qubit(psi, 1, 1.1, 0.77)[0]


@pytest.mark.parametrize("theta", np.linspace(0, 2 * math.pi, 9))
def test_singlet_equal_angles_always_opposite(theta):
    for u1 in np.linspace(0, 0.99, 12):
        for u2 in np.linspace(0, 0.99, 12):
            a, post = qc.measure_qubit(qc.bell_state("C0"), 0, theta, u1)
            b, _ = qc.measure_qubit(post, 1, theta, u2)
            assert a == -b


def test_bell_measure_swap_identity():
    psi = qc.tensor(qc.bell_state("C0"), qc.bell_state("C0"))
    np.testing.assert_allclose(qc.bell_probabilities(psi, 1, 2), [0.25] * 4, atol=1e-12)
    for label in BellLabel:
        p, post = qc.bell_project(psi, 1, 2, label)
        assert p == pytest.approx(0.25, abs=1e-12)
        outer = qc.reduce_to(post, [0, 3])
        assert outer.fidelity(qc.bell_state(label)) == pytest.approx(1.0, abs=1e-9)


def test_bell_measure_sampling_matches_labels():
    psi = qc.tensor(qc.bell_state("C0"), qc.bell_state("C0"))
    got = [qc.bell_measure(psi, 1, 2, u)[0] for u in (0.1, 0.3, 0.6, 0.9)]
    assert got == [BellLabel.C0, BellLabel.C1, BellLabel.C2, BellLabel.C3]
    label, post = qc.bell_measure(psi, 1, 2, 0.1)
    assert qc.reduce_to(post, [0, 3]).fidelity(qc.bell_state("C0")) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("u", [0.0, 0.5, 0.999999])
def test_bell_measure_own_basis(u):
    label, _ = qc.bell_measure(qc.bell_state("C1"), 0, 1, u)
    assert label is BellLabel.C1


def test_rounding_residue_never_selected_at_u_zero():
    _, post = qc.measure_qubit(qc.bell_state("C0"), 0, math.pi / 4, 0.0)
    assert qc.measure_qubit(post, 1, math.pi / 4, 0.0)[0] == -1


def test_bell_measure_rejects_same_qubit():
    with pytest.raises(ValueError):
        qc.bell_measure(qc.bell_state("C1"), 0, 0, 0.5)


def test_joint_distribution_examples():
    np.testing.assert_allclose(qc.joint_distribution(qc.bell_state("C0"), 0.3, 0.3), [[0, 0.5], [0.5, 0]], atol=1e-12)
    same = (1 - math.cos(math.pi / 4)) / 4
    np.testing.assert_allclose(
        qc.joint_distribution(qc.bell_state("C0"), 0, math.pi / 4), [[same, 0.5 - same], [0.5 - same, same]], atol=1e-12
    )
    assert same == pytest.approx(0.0732, abs=1e-4)
    np.testing.assert_allclose(qc.joint_distribution(qc.bell_state("C1"), 0, 0), [[0.5, 0], [0, 0.5]], atol=1e-12)
    with pytest.raises(ValueError):
        qc.joint_distribution(qc.basis_state("0"), 0, 0)


def test_correlation_examples():
    assert qc.correlation(qc.bell_state("C0"), 1.0, 1.0) == pytest.approx(-1.0, abs=1e-12)
    assert qc.correlation(qc.bell_state("C0"), 0, math.pi / 2) == pytest.approx(0.0, abs=1e-12)
    assert qc.correlation(qc.bell_state("C1"), 0, 0) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=60)
@given(labels, angles, angles)
def test_joint_distribution_matches_brute_force(label, a, b):
    psi = qc.bell_state(label)
    got = qc.joint_distribution(psi, a, b)
    np.testing.assert_allclose(got, oracles.joint(psi.amplitudes, qc.normalize_angle(a), qc.normalize_angle(b)), atol=1e-12)
    assert got.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(got >= -1e-15)
    e = float(got[0, 0] + got[1, 1] - got[0, 1] - got[1, 0])
    assert qc.correlation(psi, a, b) == pytest.approx(e, abs=1e-12)


@settings(max_examples=60)
@given(labels, angles, angles)
def test_commutation(label, a, b):
    psi = qc.bell_state(label)
    np.testing.assert_allclose(
        qc.joint_distribution(psi, a, b, order=(0, 1)), qc.joint_distribution(psi, a, b, order=(1, 0)), atol=1e-12
    )


@settings(max_examples=60)
@given(labels, angles)
def test_uniform_marginals(label, theta):
    for qubit in (0, 1):
        assert qc.outcome_probabilities(qc.bell_state(label), qubit, theta) == pytest.approx((0.5, 0.5), abs=1e-12)


@given(angles, angles)
def test_equal_mixture_is_maximally_mixed(a, b):
    mix = sum(qc.bell_joint_distribution(lab, a, b) for lab in BellLabel) / 4
    np.testing.assert_allclose(mix, 0.25, atol=1e-12)


@st.composite
def random_states(draw):
    n = draw(st.integers(1, 4))
    re = draw(st.lists(st.floats(-1, 1), min_size=2**n, max_size=2**n))
    im = draw(st.lists(st.floats(-1, 1), min_size=2**n, max_size=2**n))
    v = np.array(re) + 1j * np.array(im)
    norm = np.linalg.norm(v)
    if norm < 1e-3:
        v = np.zeros(2**n, dtype=complex)
        v[0] = 1
        norm = 1.0
    return qc.PureState(v / norm)


@settings(max_examples=80)
@given(random_states(), angles, st.floats(0, 0.999999), st.data())
def test_measurement_preserves_norm_and_completeness(state, theta, u, data):
    qubit = data.draw(st.integers(0, state.n_qubits - 1))
    p_plus, p_minus = qc.outcome_probabilities(state, qubit, theta)
    assert p_plus + p_minus == pytest.approx(1.0, abs=1e-12)
    brute = oracles.single(state.amplitudes, state.n_qubits, qubit, qc.normalize_angle(theta), 1)
    assert p_plus == pytest.approx(brute, abs=1e-12)
    outcome, post = qc.measure_qubit(state, qubit, theta, u)
    if 1e-12 < p_plus < 1 - 1e-12:
        assert outcome == (1 if u < p_plus else -1)
    assert post.norm() == pytest.approx(1.0, abs=1e-9)
    # measuring again at the same angle reproduces the outcome with certainty
    again = qc.outcome_probabilities(post, qubit, theta)
    assert again[0 if outcome == 1 else 1] == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=60)
@given(random_states().filter(lambda s: s.n_qubits >= 2), st.floats(0, 0.999999), st.data())
def test_bell_probabilities_complete(state, u, data):
    i = data.draw(st.integers(0, state.n_qubits - 1))
    j = data.draw(st.integers(0, state.n_qubits - 1).filter(lambda x: x != i))
    probs = qc.bell_probabilities(state, i, j)
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)
    _, post = qc.bell_measure(state, i, j, u)
    assert post.norm() == pytest.approx(1.0, abs=1e-9)


@given(angles)
def test_normalize_angle_range(theta):
    t = qc.normalize_angle(theta)
    assert 0.0 <= t < 2 * math.pi
    assert math.cos(t) == pytest.approx(math.cos(theta), abs=1e-9)


def test_normalize_angle_tiny_negative():
    assert qc.normalize_angle(-1e-18) == 0.0
    with pytest.raises(ValueError):
        qc.normalize_angle(float("nan"))
