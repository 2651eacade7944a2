import numpy as np
import pytest

from kvnsim import fock
from kvnsim.errors import CapacityError, DimensionError, TruncationOverflowError
from kvnsim.gaussian import GaussianState, apply_gate as g_apply, gate_for
from kvnsim.problems import make_harmonic_oscillator, make_kdv
from kvnsim.trotter import Gate


def test_ladder_and_quadratures():
    q = fock.single_mode_word("Q", 6)
    p = fock.single_mode_word("P", 6)
    np.testing.assert_allclose(q, q.conj().T)
    comm = q @ p - p @ q
    np.testing.assert_allclose(comm[:5, :5], 1j * np.eye(5), atol=1e-14)


def test_compressed_square_has_exact_diagonal():
    qq = fock.single_mode_word("QQ", 5)
    np.testing.assert_allclose(np.diag(qq).real, np.arange(5) + 0.5)


def test_capacity_guard():
    with pytest.raises(CapacityError):
        fock.build_operators(6, 20, max_dim=1000)


def test_vacuum_and_displaced_moments():
    st = fock.prepare_initial([0.0, 0.8], 0.0, 20)
    mu, var = fock.quadrature_moments(st)
    np.testing.assert_allclose(mu, [0.0, 0.8], atol=1e-12)
    np.testing.assert_allclose(var, 0.5, atol=1e-12)


def test_squeezed_state_variance():
    st = fock.prepare_initial([0.3], 0.4, 40)
    mu, var = fock.quadrature_moments(st)
    assert mu[0] == pytest.approx(0.3, abs=1e-10)
    assert var[0] == pytest.approx(np.exp(-0.8) / 2, abs=1e-10)


def test_leakage_guard_on_prepare():
    with pytest.raises(TruncationOverflowError) as info:
        fock.prepare_initial([3.0], 0.0, 6)
    assert info.value.leakage > 1e-6


def test_state_json_round_trip(tmp_path):
    st = fock.prepare_initial([0.2, 0.1], 0.1, 5, leakage_threshold=None)
    st.save(tmp_path / "s.json")
    back = fock.FockState.from_json((tmp_path / "s.json").read_text())
    np.testing.assert_array_equal(back.amplitudes, st.amplitudes)


def test_state_dimension_check():
    with pytest.raises(DimensionError):
        fock.FockState(2, 3, np.zeros(8))


def test_lanczos_matches_dense(rng):
    n = 300
    a = rng.normal(size=(n, n))
    h = (a + a.T) / np.sqrt(n)
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    w, u = np.linalg.eigh(h)
    ref = u @ (np.exp(-1j * 2.0 * w) * (u.T @ v))
    out = fock.lanczos_expm_multiply(h, v, 2.0)
    np.testing.assert_allclose(out, ref, atol=1e-10 * np.linalg.norm(v))


def test_evolve_ho_matches_gaussian():
    h = make_harmonic_oscillator(1.0, 1.0).hamiltonian
    op = fock.hamiltonian_matrix(h, cutoff=20)
    st = fock.evolve(fock.prepare_initial([0.7, 0.0], 0.2, 20), op, 1.3, leakage_threshold=1e-8)
    from kvnsim.gaussian import exact_propagator

    g = g_apply(GaussianState.squeezed_displaced([0.7, 0.0], 0.2), exact_propagator(h, 1.3))
    mu, var = fock.quadrature_moments(st)
    np.testing.assert_allclose(mu, g.mean[:2], atol=1e-9)
    np.testing.assert_allclose(var, np.diag(g.cov)[:2], atol=1e-9)
    assert abs(st.norm - 1.0) < 1e-12


def test_evolve_krylov_and_dense_agree():
    op = fock.hamiltonian_matrix(make_kdv(3).hamiltonian, cutoff=8)
    st = fock.prepare_initial(make_kdv(3).default_u0, 0.0, 8, leakage_threshold=None)
    a = fock.evolve(st, op, 0.1, method="dense", leakage_threshold=None)
    b = fock.evolve(st, op, 0.1, method="krylov", leakage_threshold=None)
    np.testing.assert_allclose(a.amplitudes, b.amplitudes, atol=1e-10)


def test_evolve_leakage_raises():
    op = fock.hamiltonian_matrix(make_harmonic_oscillator(1.0, 3.0).hamiltonian, cutoff=8)
    st = fock.prepare_initial([0.5, 0.0], 0.0, 8)
    with pytest.raises(TruncationOverflowError):
        fock.evolve(st, op, 2.0, steps=4)


def test_hamiltonian_is_hermitian():
    op = fock.hamiltonian_matrix(make_kdv(4).hamiltonian, cutoff=5)
    assert op.hermiticity_error() < 1e-12


@pytest.mark.parametrize("kind,param", [("BS", 0.4), ("TMS", 0.15), ("CX", 0.3), ("QQ", -0.4)])
def test_gaussian_gates_agree_with_symplectic(kind, param):
    cutoff = 30
    psi = fock.prepare_initial([0.4, -0.3], 0.1, cutoff)
    out = fock.apply_gate(psi, Gate(kind, (0, 1), param))
    g = g_apply(GaussianState.squeezed_displaced([0.4, -0.3], 0.1), gate_for(kind, (0, 1), param, 2))
    mu, var = fock.quadrature_moments(out)
    np.testing.assert_allclose(mu, g.mean[:2], atol=1e-7)
    np.testing.assert_allclose(var, np.diag(g.cov)[:2], atol=1e-6)


def test_displacement_gate():
    psi = fock.prepare_initial([0.0], 0.0, 30)
    out = fock.apply_gate(psi, Gate("DISPLACE", (0,), 0.6))
    assert fock.quadrature_moments(out)[0][0] == pytest.approx(0.6, abs=1e-9)


def test_cubic_phase_gate_shifts_momentum():
    # exp(i g Q^3) maps P -> P + 3 g Q^2, leaving Q untouched
    cutoff, g = 40, 0.02
    psi = fock.prepare_initial([0.5], 0.3, cutoff)
    out = fock.cubic_phase_gate(psi, 0, "Q3", g)
    q2 = psi.expect_mode("QQ", 0).real
    p0, p1 = psi.expect_mode("P", 0).real, out.expect_mode("P", 0).real
    assert p1 - p0 == pytest.approx(3 * g * q2, abs=1e-8)
    assert out.expect_mode("Q", 0).real == pytest.approx(0.5, abs=1e-10)
    with pytest.raises(ValueError):
        fock.cubic_phase_gate(psi, 0, "Q2", g)


def test_cubic_decomposition_frozen_deficits():
    deficit = 1 - fock.verify_cubic_decomposition(0.1, 0.1, 20)
    assert deficit == pytest.approx(1.8158048715521957e-05, rel=1e-4)
    literal = 1 - fock.verify_cubic_decomposition(0.1, 0.1, 40, variant="literal", leakage_threshold=None)
    assert literal == pytest.approx(1.675443054943715e-04, rel=1e-4)


def test_cubic_decomposition_deficit_shrinks_with_strength():
    weak = 1 - fock.verify_cubic_decomposition(0.01, 0.1, 30)
    strong = 1 - fock.verify_cubic_decomposition(0.1, 0.1, 30)
    assert weak < 1e-8 and weak < strong
