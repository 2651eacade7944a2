import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.linalg import expm

from kvnsim.gaussian import GaussianState, apply_gate, exact_propagator, gate_for, symplectic_residual
from kvnsim.phase_model import PolyVectorField, build_kvn_hamiltonian
from kvnsim.trotter import Gate, GateSchedule, schedule_symplectic

finite = st.floats(-2.0, 2.0, allow_nan=False)
kinds = st.sampled_from(["BS", "TMS", "CX", "QQ"])


@st.composite
def gate_lists(draw, n_modes=3, max_size=8):
    out = []
    for _ in range(draw(st.integers(1, max_size))):
        j, k = draw(st.permutations(range(n_modes)))[:2]
        out.append(Gate(draw(kinds), (j, k), draw(st.floats(-1.0, 1.0))))
    return out


@given(kinds, finite, st.integers(2, 4))
def test_every_gate_is_symplectic(kind, param, n):
    assert symplectic_residual(gate_for(kind, (0, n - 1), param, n).S) < 1e-10


@given(gate_lists())
@settings(max_examples=50)
def test_uncertainty_preserved_by_gate_sequences(gates):
    state = GaussianState.squeezed_displaced([0.3, -0.1, 0.2], 0.4)
    sched = GateSchedule(3, 1, 1.0, tuple(gates), "random")
    out = apply_gate(state, schedule_symplectic(sched))
    assert out.uncertainty_min_eig() > -1e-9 * max(1.0, np.abs(out.cov).max())
    np.testing.assert_allclose(out.cov, out.cov.T, atol=1e-12 * max(1.0, np.abs(out.cov).max()))


@given(arrays(float, (3, 3), elements=st.floats(-1.0, 1.0)), st.floats(0.0, 2.0), st.floats(0.0, 2.0))
@settings(max_examples=50)
def test_propagator_composition(a, t1, t2):
    h = build_kvn_hamiltonian(PolyVectorField(3, a))
    lhs = exact_propagator(h, t1).then(exact_propagator(h, t2)).S
    rhs = exact_propagator(h, t1 + t2).S
    np.testing.assert_allclose(lhs, rhs, atol=1e-9 * max(1.0, np.abs(rhs).max()))


@given(arrays(float, (3, 3), elements=st.floats(-1.0, 1.0)),
       arrays(float, 3, elements=st.floats(-1.0, 1.0)), st.floats(0.0, 3.0))
@settings(max_examples=50)
def test_means_follow_classical_linear_flow(a, u0, t):
    h = build_kvn_hamiltonian(PolyVectorField(3, a))
    out = apply_gate(GaussianState.squeezed_displaced(u0, 0.0), exact_propagator(h, t))
    np.testing.assert_allclose(out.mean[:3], expm(a * t) @ u0, atol=1e-9 * max(1.0, np.abs(out.mean).max()))


@given(arrays(float, (2, 2), elements=st.floats(-1.0, 1.0)),
       arrays(float, (2, 2), elements=st.floats(-1.0, 1.0)), st.floats(-3.0, 3.0))
def test_hamiltonian_is_linear_in_the_field(a, b, alpha):
    f = PolyVectorField(2, a, [(0, 1, 1, 0.5)])
    g = PolyVectorField(2, b, [(1, 0, 1, -0.25)])
    lhs = build_kvn_hamiltonian(f + alpha * g)
    assert lhs.same_terms(build_kvn_hamiltonian(f) + alpha * build_kvn_hamiltonian(g), atol=1e-12)


@given(gate_lists(), st.integers(1, 4))
@settings(max_examples=30)
def test_schedule_json_round_trip(gates, p):
    sched = GateSchedule(3, p, 0.5, tuple(gates), "random")
    back = GateSchedule.from_json(sched.to_json())
    assert back.step_gates == sched.step_gates and back.p == p
