import numpy as np
import pytest

from kvnsim.errors import DimensionError, UnsupportedHamiltonianError
from kvnsim.gaussian import (
    GaussianState,
    SymplecticGate,
    apply_gate,
    exact_propagator,
    gate_for,
    quadrature_expectations,
    single_mode_squeezer,
    symplectic_form,
    symplectic_residual,
)
from kvnsim.phase_model import KvnHamiltonian
from kvnsim.problems import make_harmonic_oscillator, make_kdv


def test_vacuum_moments():
    mu, var = quadrature_expectations(GaussianState.vacuum(3))
    np.testing.assert_array_equal(mu, 0.0)
    np.testing.assert_array_equal(var, 0.5)


def test_squeezed_displaced_state():
    s = GaussianState.squeezed_displaced([0.7, -0.2], 0.4)
    mu, var = quadrature_expectations(s)
    np.testing.assert_allclose(mu, [0.7, -0.2])
    np.testing.assert_allclose(var, np.exp(-0.8) / 2)
    assert s.uncertainty_min_eig() == pytest.approx(0.0, abs=1e-12)


def test_squeezer_matches_squeezed_state():
    out = apply_gate(GaussianState.vacuum(1), single_mode_squeezer(1, 0, 0.3))
    assert quadrature_expectations(out)[1][0] == pytest.approx(np.exp(-0.6) / 2)


def test_zero_hamiltonian_gives_identity():
    g = exact_propagator(KvnHamiltonian(2, np.zeros((4, 4))), 3.7)
    np.testing.assert_array_equal(g.S, np.eye(4))
    np.testing.assert_array_equal(g.d, 0.0)


def test_cubic_hamiltonian_rejected():
    with pytest.raises(UnsupportedHamiltonianError, match="fock"):
        exact_propagator(make_kdv(4).hamiltonian, 0.1)


def test_cx_example_from_hand_integration():
    state = GaussianState(2, [1.0, 0.0, 0.0, 1.0], 0.5 * np.eye(4))
    out = apply_gate(state, gate_for("CX", (0, 1), 2.0, 2))
    np.testing.assert_allclose(out.mean, [1.0, 2.0, -2.0, 1.0])


def test_bs_and_tms_trivial_and_quarter_turn():
    for kind in ("BS", "TMS", "CX", "QQ"):
        np.testing.assert_array_equal(gate_for(kind, (0, 1), 0.0, 2).S, np.eye(4))
    s = gate_for("BS", (0, 1), np.pi / 2, 2).S
    np.testing.assert_allclose(np.linalg.matrix_power(s, 4), np.eye(4), atol=1e-15)
    # angle pi/2 swaps the modes with a sign
    np.testing.assert_allclose(s @ [1.0, 0.0, 0.0, 0.0], [0.0, -1.0, 0.0, 0.0], atol=1e-15)


def test_bs_reflectivity_is_cos_theta():
    theta = 0.3
    s = gate_for("BS", (0, 1), theta, 2).S
    assert s[0, 0] == pytest.approx(np.cos(theta))


def test_tms_sign_convention():
    r = 0.4
    s = gate_for("TMS", (0, 1), r, 2).S
    plus = np.array([1.0, 1.0, 0.0, 0.0])
    minus_p = np.array([0.0, 0.0, 1.0, -1.0])
    np.testing.assert_allclose(plus @ s, np.exp(r) * plus)
    np.testing.assert_allclose(minus_p @ s, np.exp(r) * minus_p)
    # a negative strength amplifies Q1 - Q2
    qm = np.array([1.0, -1.0, 0.0, 0.0])
    np.testing.assert_allclose(qm @ gate_for("TMS", (0, 1), -r, 2).S, np.exp(r) * qm)


def test_gate_for_matches_generator_exponential():
    # BS on (0, 1) from H = theta (P0 Q1 - Q0 P1)
    theta = 0.37
    m = np.zeros((4, 4))
    m[2, 1] = m[1, 2] = theta
    m[0, 3] = m[3, 0] = -theta
    np.testing.assert_allclose(exact_propagator(KvnHamiltonian(2, m), 1.0).S, gate_for("BS", (0, 1), theta, 2).S,
                               atol=1e-14)


def test_displacement():
    out = apply_gate(GaussianState.vacuum(2), gate_for("DISPLACE", (1,), 0.8, 2, p_shift=-0.1))
    np.testing.assert_allclose(out.mean, [0.0, 0.8, 0.0, -0.1])
    np.testing.assert_array_equal(out.cov, 0.5 * np.eye(4))


def test_gate_errors():
    with pytest.raises(ValueError):
        gate_for("BS", (1, 1), 0.1, 2)
    with pytest.raises(ValueError):
        gate_for("XYZ", (0, 1), 0.1, 2)
    with pytest.raises(DimensionError):
        gate_for("BS", (0, 2), 0.1, 2)
    with pytest.raises(DimensionError):
        apply_gate(GaussianState.vacuum(1), SymplecticGate.identity(2))


def test_propagator_composition_and_symplecticity():
    h = make_harmonic_oscillator(1.3, 0.8).hamiltonian
    a, b = exact_propagator(h, 0.4), exact_propagator(h, 1.1)
    ab = exact_propagator(h, 1.5)
    np.testing.assert_allclose(a.then(b).S, ab.S, atol=1e-12)
    assert ab.symplectic_error() < 1e-12


def test_linear_term_displacement():
    # H = b P_0 drifts Q_0 at rate b
    h = KvnHamiltonian(1, np.zeros((2, 2)), linear=[0.0, 0.3])
    g = exact_propagator(h, 2.0)
    np.testing.assert_allclose(g.d, [0.6, 0.0])


def test_symplectic_form_properties():
    om = symplectic_form(3)
    np.testing.assert_array_equal(om @ om, -np.eye(6))
    assert symplectic_residual(np.eye(6)) == 0.0
    assert symplectic_residual(2 * np.eye(6)) > 1.0


def test_frozen_ho_propagator():
    # oracle: m=1, w=2 at t=0.7; S restricted to Q block = [[cos wt, sin wt / w], [-w sin wt, cos wt]]
    s = exact_propagator(make_harmonic_oscillator(1.0, 2.0).hamiltonian, 0.7).S
    c, sn = np.cos(1.4), np.sin(1.4)
    np.testing.assert_allclose(s[:2, :2], [[c, sn / 2], [-2 * sn, c]], atol=1e-13)
