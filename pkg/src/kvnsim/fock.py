"""Truncated Fock-space simulation of KvN Hamiltonians and cubic gates.

Basis states ``|n_1, ..., n_N>`` with ``0 <= n_j < cutoff`` are ordered
mode-major (mode 0 is the slowest index), matching ``numpy.kron`` of the
single-mode factors and a C-order reshape of the amplitude vector to
``(cutoff,) * N``.

Polynomial operators are built as compressions of the exact operator: each
single-mode word is multiplied in an enlarged space and then cut back to the
cutoff, so e.g. ``Q^2`` has the correct diagonal also in its last row.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from functools import cached_property, lru_cache
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh_tridiagonal

from .errors import CapacityError, DimensionError, TruncationOverflowError

log = logging.getLogger(__name__)

DEFAULT_MAX_DIM = 2**20
DEFAULT_LEAKAGE_THRESHOLD = 1e-6
DENSE_LIMIT = 2000


def _check_capacity(n_modes, cutoff, max_dim):
    if cutoff < 1 or n_modes < 1:
        raise ValueError("n_modes and cutoff must be positive")
    dim = cutoff**n_modes
    if dim > max_dim:
        raise CapacityError(f"cutoff {cutoff} on {n_modes} modes gives dimension {dim} > {max_dim}")
    return dim


# --- single-mode matrices --------------------------------------------------


@lru_cache(maxsize=None)
def _ladder(dim):
    a = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1)
    a.setflags(write=False)
    return a


def _letter(ch, dim):
    a = _ladder(dim).astype(complex)
    if ch == "a":
        return a
    if ch == "A":
        return a.T.copy()
    if ch == "Q":
        return (a + a.T) / np.sqrt(2)
    if ch == "P":
        return 1j * (a.T - a) / np.sqrt(2)
    if ch == "I":
        return np.eye(dim, dtype=complex)
    raise ValueError(f"unknown operator letter {ch!r}")


@lru_cache(maxsize=None)
def single_mode_word(word, cutoff):
    """Compressed product of letters ``a`` (annihilation), ``A`` (creation),
    ``Q``, ``P``, read left to right as a matrix product."""
    big = cutoff + len(word)
    out = np.eye(big, dtype=complex)
    for ch in word:
        out = out @ _letter(ch, big)
    out = np.ascontiguousarray(out[:cutoff, :cutoff])
    out.setflags(write=False)
    return out


def _kron_modes(factors, n_modes, cutoff):
    """Kronecker product with ``factors[j]`` on mode ``j`` and identity elsewhere."""
    eye = sp.identity(cutoff, dtype=complex, format="csr")
    out = None
    for j in range(n_modes):
        f = factors.get(j)
        f = eye if f is None else sp.csr_matrix(f)
        out = f if out is None else sp.kron(out, f, format="csr")
    return out


@dataclass(frozen=True, eq=False)
class FockOperators:
    """Ladder and quadrature operators of every mode as sparse matrices."""

    n_modes: int
    cutoff: int

    @property
    def dim(self):
        return self.cutoff**self.n_modes

    def embed(self, word, mode):
        return _kron_modes({mode: single_mode_word(word, self.cutoff)}, self.n_modes, self.cutoff)

    @cached_property
    def a(self):
        return [self.embed("a", j) for j in range(self.n_modes)]

    @cached_property
    def adag(self):
        return [self.embed("A", j) for j in range(self.n_modes)]

    @cached_property
    def Q(self):
        return [self.embed("Q", j) for j in range(self.n_modes)]

    @cached_property
    def P(self):
        return [self.embed("P", j) for j in range(self.n_modes)]

    def identity(self):
        return sp.identity(self.dim, dtype=complex, format="csr")


def build_operators(n_modes, cutoff, max_dim=DEFAULT_MAX_DIM):
    _check_capacity(n_modes, cutoff, max_dim)
    return FockOperators(int(n_modes), int(cutoff))


def compressed_monomial(ops, words):
    """Sparse operator for a product of per-mode words, e.g. ``{0: "P", 2: "QQ"}``."""
    factors = {m: single_mode_word(w, ops.cutoff) for m, w in words.items()}
    return _kron_modes(factors, ops.n_modes, ops.cutoff)


@dataclass(frozen=True, eq=False)
class SparseOperator:
    matrix: sp.csr_matrix
    hermitian: bool = False

    def __post_init__(self):
        m = sp.csr_matrix(self.matrix, dtype=complex)
        if m.shape[0] != m.shape[1]:
            raise DimensionError("operator must be square")
        object.__setattr__(self, "matrix", m)
        if self.hermitian and self.hermiticity_error() >= 1e-12:
            raise ValueError(f"operator claimed Hermitian but ||H - H^dag|| = {self.hermiticity_error():.3e}")

    @property
    def dim(self):
        return self.matrix.shape[0]

    def hermiticity_error(self):
        diff = self.matrix - self.matrix.getH()
        return float(np.sqrt(np.sum(np.abs(diff.data) ** 2))) if diff.nnz else 0.0

    @cached_property
    def eig(self):
        """Dense eigendecomposition, computed once."""
        return np.linalg.eigh(self.matrix.toarray())

    def __matmul__(self, v):
        return self.matrix @ v


def _sym(ops, word_a, word_b, mode_a, mode_b):
    """Weyl-symmetric product ``(X Y + Y X)/2`` of two single-letter operators."""
    if mode_a != mode_b:
        return compressed_monomial(ops, {mode_a: word_a, mode_b: word_b})
    return 0.5 * (
        compressed_monomial(ops, {mode_a: word_a + word_b})
        + compressed_monomial(ops, {mode_a: word_b + word_a})
    )


def _cubic_term(ops, j, k, l):
    """``(P_j Q_k Q_l + Q_k Q_l P_j)/2`` as a sparse matrix."""
    words = {}
    for m in (k, l):
        words[m] = words.get(m, "") + "Q"
    if j not in words:
        words[j] = "P"
        return compressed_monomial(ops, words)
    q_on_j = words.pop(j)
    left = dict(words)
    left[j] = "P" + q_on_j
    right = dict(words)
    right[j] = q_on_j + "P"
    return 0.5 * (compressed_monomial(ops, left) + compressed_monomial(ops, right))


def hamiltonian_matrix(h, n_modes=None, cutoff=8, max_dim=DEFAULT_MAX_DIM):
    n = h.n_modes if n_modes is None else int(n_modes)
    if n != h.n_modes:
        raise DimensionError(f"Hamiltonian has {h.n_modes} modes, asked for {n}")
    ops = build_operators(n, cutoff, max_dim)
    letters = [("Q", j) for j in range(n)] + [("P", j) for j in range(n)]
    out = sp.csr_matrix((ops.dim, ops.dim), dtype=complex)
    m = h.quadratic
    for a in range(2 * n):
        for b in range(a, 2 * n):
            coef = m[a, b] if a != b else 0.5 * m[a, a]
            if coef == 0.0:
                continue
            (wa, ma), (wb, mb) = letters[a], letters[b]
            out = out + coef * _sym(ops, wa, wb, ma, mb)
    for a, c in enumerate(h.linear):
        if c != 0.0:
            w, mode = letters[a]
            out = out + c * ops.embed(w, mode)
    for j, k, l, c in h.cubic_terms:
        if c != 0.0:
            out = out + c * _cubic_term(ops, j, k, l)
    if h.scalar_shift:
        out = out + h.scalar_shift * ops.identity()
    out.eliminate_zeros()
    return SparseOperator(out, hermitian=True)


# --- states ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FockState:
    n_modes: int
    cutoff: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amp.size != self.cutoff**self.n_modes:
            raise DimensionError(
                f"{amp.size} amplitudes do not match cutoff {self.cutoff} on {self.n_modes} modes"
            )
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @property
    def dim(self):
        return self.amplitudes.size

    @property
    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def tensor(self):
        return self.amplitudes.reshape((self.cutoff,) * self.n_modes)

    @property
    def leakage(self):
        """Probability on basis states with some ``n_j = cutoff - 1``."""
        probs = np.abs(self.tensor()) ** 2
        inner = probs[(slice(0, self.cutoff - 1),) * self.n_modes].sum()
        return float(max(probs.sum() - inner, 0.0))

    def with_amplitudes(self, amp):
        return FockState(self.n_modes, self.cutoff, amp)

    def reduced_density(self, mode):
        t = np.moveaxis(self.tensor(), mode, 0).reshape(self.cutoff, -1)
        return t @ t.conj().T

    def expect_mode(self, word, mode):
        return complex(np.sum(self.reduced_density(mode) * single_mode_word(word, self.cutoff).T))

    def overlap(self, other):
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def to_json(self):
        """Amplitude dump: ``{"n_modes", "cutoff", "re": [...], "im": [...]}``."""
        return json.dumps({
            "n_modes": self.n_modes,
            "cutoff": self.cutoff,
            "re": self.amplitudes.real.tolist(),
            "im": self.amplitudes.imag.tolist(),
        })

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(d["n_modes"], d["cutoff"], np.asarray(d["re"]) + 1j * np.asarray(d["im"]))

    def save(self, path):
        Path(path).write_text(self.to_json())


def quadrature_moments(state):
    """Return ``(<Q_j>, Var(Q_j))`` for all modes."""
    means = np.empty(state.n_modes)
    variances = np.empty(state.n_modes)
    q = single_mode_word("Q", state.cutoff)
    q2 = single_mode_word("QQ", state.cutoff)
    for j in range(state.n_modes):
        rho = state.reduced_density(j)
        mu = float(np.real(np.sum(rho * q.T)))
        means[j] = mu
        variances[j] = float(np.real(np.sum(rho * q2.T))) - mu * mu
    return means, variances


def _check_leakage(state, threshold, where):
    leak = state.leakage
    if threshold is not None and leak > threshold:
        raise TruncationOverflowError(leak, threshold, where)
    return leak


def _single_mode_gaussian(u, s, cutoff):
    """Squeezed coherent state with ``<Q> = u``, ``<P> = 0``, ``Var(Q) = e^{-2s}/2``.

    Built in an enlarged space as ``D(u/sqrt2) S(s)|0>`` and truncated.
    """
    from scipy.linalg import expm

    big = max(4 * cutoff, cutoff + 80)
    a = _ladder(big).astype(complex)
    ad = a.T
    vac = np.zeros(big, dtype=complex)
    vac[0] = 1.0
    sq = expm(0.5 * s * (a @ a - ad @ ad)) @ vac
    alpha = u / np.sqrt(2.0)
    vec = expm(alpha * ad - np.conj(alpha) * a) @ sq
    return vec[:cutoff]


def prepare_initial(u0, squeezing=0.0, cutoff=8, leakage_threshold=DEFAULT_LEAKAGE_THRESHOLD,
                    max_dim=DEFAULT_MAX_DIM):
    """Product of Q-squeezed displaced single-mode states, renormalized."""
    u0 = np.atleast_1d(np.asarray(u0, dtype=float))
    n = u0.size
    _check_capacity(n, cutoff, max_dim)
    s = np.broadcast_to(np.asarray(squeezing, dtype=float), (n,))
    amp = np.ones(1, dtype=complex)
    lost = 0.0
    for j in range(n):
        vec = _single_mode_gaussian(u0[j], s[j], cutoff)
        lost = max(lost, 1.0 - float(np.vdot(vec, vec).real))
        amp = np.kron(amp, vec)
    amp /= np.linalg.norm(amp)
    state = FockState(n, cutoff, amp)
    leak = _check_leakage(state, leakage_threshold, "prepare_initial")
    log.debug("prepared state: edge leakage %.3e, truncated norm %.3e", leak, lost)
    return state


# --- propagation ----------------------------------------------------------------


def lanczos_expm_multiply(matrix, v, t, krylov_dim=30, tol=1e-12):
    """``exp(-i t H) v`` for Hermitian ``H`` by short-iterated Lanczos.

    Each substep builds a Krylov basis of size ``krylov_dim`` and accepts the
    largest step ``h`` (halving from the remaining time) whose a-posteriori
    error estimate ``beta * |h_{m+1,m}| * |[exp(-i h T) e_1]_m|`` is below
    ``tol * h / t``.
    """
    v = np.array(v, dtype=complex)
    t = float(t)
    if t == 0.0:
        return v
    done = 0.0
    h = t
    while done < t * (1 - 1e-15):
        beta = np.linalg.norm(v)
        if beta == 0.0:
            return v
        basis = [v / beta]
        alphas, betas = [], []
        w_prev = None
        for j in range(krylov_dim):
            w = matrix @ basis[j]
            alpha = np.vdot(basis[j], w).real
            w = w - alpha * basis[j]
            if w_prev is not None:
                w = w - betas[-1] * w_prev
            # full reorthogonalization keeps the basis usable for long substeps
            for q in basis:
                w = w - np.vdot(q, w) * q
            alphas.append(alpha)
            b = np.linalg.norm(w)
            if b < 1e-14 * max(1.0, abs(alpha)):
                betas.append(0.0)
                break
            betas.append(b)
            w_prev = basis[j]
            basis.append(w / b)
        m = len(alphas)
        evals, evecs = eigh_tridiagonal(np.array(alphas), np.array(betas[: m - 1]))
        remaining = t - done
        h = min(h * 2.0, remaining)
        while True:
            y = evecs @ (np.exp(-1j * h * evals) * evecs[0].conj())
            err = beta * betas[m - 1] * abs(y[m - 1])
            if err <= tol * h / t or betas[m - 1] == 0.0:
                break
            h *= 0.5
        v = beta * (np.array(basis[:m]).T @ y)
        done += h
    return v


def propagate(op, amplitudes, t, method="auto", tol=1e-12):
    """Apply ``exp(-i t H)`` to a vector."""
    if method == "auto":
        method = "dense" if op.dim <= DENSE_LIMIT else "krylov"
    if method == "dense":
        w, v = op.eig
        return v @ (np.exp(-1j * t * w) * (v.conj().T @ amplitudes))
    if method == "krylov":
        return lanczos_expm_multiply(op.matrix, amplitudes, t, tol=tol)
    raise ValueError(f"unknown propagation method {method!r}")


def evolve(state, h, t, steps=1, leakage_threshold=DEFAULT_LEAKAGE_THRESHOLD, method="auto", tol=1e-12):
    """Evolve ``state`` under ``exp(-i H t)`` in ``steps`` equal substeps.

    Leakage at the cutoff edge is checked after every substep and raises
    :class:`TruncationOverflowError` once it exceeds ``leakage_threshold``.
    """
    if not isinstance(h, SparseOperator):
        raise TypeError("evolve expects a SparseOperator (see hamiltonian_matrix)")
    if h.dim != state.dim:
        raise DimensionError(f"operator dimension {h.dim} != state dimension {state.dim}")
    herr = h.hermiticity_error()
    if herr >= 1e-12:
        raise ValueError(f"Hamiltonian is not Hermitian (||H - H^dag|| = {herr:.3e})")
    amp = state.amplitudes
    norm0 = np.linalg.norm(amp)
    dt = float(t) / int(steps)
    for i in range(int(steps)):
        amp = propagate(h, amp, dt, method=method, tol=tol)
        _check_leakage(state.with_amplitudes(amp), leakage_threshold, f"evolve substep {i + 1}/{steps}")
    drift = abs(np.linalg.norm(amp) - norm0)
    if drift > 1e-9:
        log.warning("norm drift %.3e during evolve", drift)
    return state.with_amplitudes(amp)


# --- gates -------------------------------------------------------------------------


_GENERATORS = {
    # kind: (words on the modes, sign) with unitary exp(sign * i * param * G)
    "BS": ((("P", "Q"), ("Q", "P")), (1.0, -1.0), -1.0),
    "TMS": ((("P", "Q"), ("Q", "P")), (1.0, 1.0), -1.0),
    "CX": ((("Q", "P"),), (1.0,), -1.0),
    "QQ": ((("Q", "Q"),), (1.0,), 1.0),
    "CUBIC": ((("P", "QQ"),), (1.0,), 1.0),
    "DISPLACE": ((("P",),), (1.0,), -1.0),
    "CUBIC_P": ((("PPP",),), (1.0,), 1.0),
    "CUBIC_Q": ((("QQQ",),), (1.0,), 1.0),
}


@lru_cache(maxsize=64)
def _generator_eig(kind, cutoff):
    words, coefs, _ = _GENERATORS[kind]
    arity = len(words[0])
    gen = np.zeros((cutoff**arity,) * 2, dtype=complex)
    for ws, c in zip(words, coefs):
        mats = [single_mode_word(w, cutoff) for w in ws]
        term = mats[0]
        for m in mats[1:]:
            term = np.kron(term, m)
        gen += c * term
    gen = 0.5 * (gen + gen.conj().T)
    w, v = np.linalg.eigh(gen)
    return w, v


def gate_unitary(kind, param, cutoff):
    """Dense unitary of a gate on its own modes (``cutoff**arity`` square)."""
    kind = kind.upper()
    if kind not in _GENERATORS:
        raise ValueError(f"unknown gate kind {kind!r}")
    sign = _GENERATORS[kind][2]
    w, v = _generator_eig(kind, cutoff)
    return (v * np.exp(sign * 1j * float(param) * w)) @ v.conj().T


def apply_local(state, unitary, modes):
    """Apply a unitary acting on ``modes`` (in that order) to the state."""
    modes = tuple(modes)
    d = state.cutoff
    k = len(modes)
    tensor = np.moveaxis(state.tensor(), modes, range(k))
    shape = tensor.shape
    out = unitary @ tensor.reshape(d**k, -1)
    out = np.moveaxis(out.reshape(shape), range(k), modes)
    return state.with_amplitudes(out.reshape(-1))


# Gates whose generator is a product of single-mode quadrature functions are
# applied in quadrature eigenbases of an enlarged space; the result is the
# compression of the exact unitary rather than the exponential of a
# truncated generator (which is badly wrong for P^3 and Q^3).
_PRODUCT_GATES = {
    "CX": ("QP", lambda g, x, y: np.exp(-1j * g * np.multiply.outer(x, y))),
    "QQ": ("QQ", lambda g, x, y: np.exp(1j * g * np.multiply.outer(x, y))),
    "CUBIC": ("PQ", lambda g, x, y: np.exp(1j * g * np.multiply.outer(x, y * y))),
    "DISPLACE": ("P", lambda g, x: np.exp(-1j * g * x)),
    "CUBIC_P": ("P", lambda g, x: np.exp(1j * g * x**3)),
    "CUBIC_Q": ("Q", lambda g, x: np.exp(1j * g * x**3)),
}


def _enlarged(cutoff):
    return 2 * cutoff + 40


@lru_cache(maxsize=32)
def _quadrature_basis(letter, cutoff):
    """Eigenvalues of Q or P in the enlarged space and the first ``cutoff``
    rows of the eigenvector matrix."""
    big = _enlarged(cutoff)
    w, v = np.linalg.eigh(_letter(letter, big))
    v = np.ascontiguousarray(v[:cutoff])
    v.setflags(write=False)
    return w, v


def _apply_product_gate(state, kind, param, modes):
    letters, phase = _PRODUCT_GATES[kind]
    tensor = state.tensor()
    evals = []
    for letter, m in zip(letters, modes):
        w, v = _quadrature_basis(letter, state.cutoff)
        tensor = np.moveaxis(np.tensordot(v.conj().T, tensor, axes=([1], [m])), 0, m)
        evals.append(w)
    ph = phase(param, *evals)
    shape = [1] * state.n_modes
    for axis, m in enumerate(modes):
        shape[m] = ph.shape[axis]
    if len(modes) == 2 and modes[0] > modes[1]:
        ph = ph.T
    tensor = tensor * ph.reshape(shape)
    for letter, m in zip(letters, modes):
        _, v = _quadrature_basis(letter, state.cutoff)
        tensor = np.moveaxis(np.tensordot(v, tensor, axes=([1], [m])), 0, m)
    return state.with_amplitudes(tensor.reshape(-1))


def apply_gate(state, gate, leakage_threshold=None):
    """Apply one schedule :class:`~kvnsim.trotter.Gate` in the Fock basis."""
    if gate.kind in _PRODUCT_GATES:
        out = _apply_product_gate(state, gate.kind, gate.param, gate.modes)
    else:
        out = apply_local(state, gate_unitary(gate.kind, gate.param, state.cutoff), gate.modes)
    _check_leakage(out, leakage_threshold, f"{gate.kind} gate")
    return out


def apply_schedule(state, schedule_or_gates, leakage_threshold=DEFAULT_LEAKAGE_THRESHOLD):
    gates = getattr(schedule_or_gates, "gates", schedule_or_gates)
    for g in gates:
        state = apply_gate(state, g)
    _check_leakage(state, leakage_threshold, "schedule")
    return state


def cubic_phase_gate(state, mode, generator, strength, leakage_threshold=DEFAULT_LEAKAGE_THRESHOLD):
    """Apply ``exp(i * strength * Q^3)`` or ``exp(i * strength * P^3)`` to one mode."""
    kinds = {"Q3": "CUBIC_Q", "P3": "CUBIC_P"}
    try:
        kind = kinds[generator.upper()]
    except KeyError:
        raise ValueError("generator must be 'Q3' or 'P3'") from None
    from .trotter import Gate

    return apply_gate(state, Gate(kind, (mode,), strength), leakage_threshold)


def verify_cubic_decomposition(alpha, t, cutoff=40, variant="exact", modes=(0, 1),
                               u0=(0.5, 0.3), squeezing=0.5,
                               leakage_threshold=DEFAULT_LEAKAGE_THRESHOLD):
    """Fidelity between ``exp(3 i alpha t P_j Q_k^2)`` and its nine-gate expansion.

    Both sides act on the same two-mode product of Q-squeezed displaced states.
    ``variant="exact"`` uses :func:`~kvnsim.trotter.cubic_coupling_sequence`;
    ``variant="literal"`` uses :func:`~kvnsim.trotter.literal_cubic_sequence`.
    """
    from .trotter import Gate, cubic_coupling_sequence, literal_cubic_sequence

    j, k = modes
    psi = prepare_initial(u0, squeezing, cutoff, leakage_threshold=leakage_threshold)
    lhs = apply_gate(psi, Gate("CUBIC", (j, k), 3.0 * alpha * t))
    if variant == "exact":
        seq = cubic_coupling_sequence(j, k, 3.0 * alpha * t)
    elif variant == "literal":
        seq = literal_cubic_sequence(j, k, alpha, t)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    rhs = psi
    for g in seq:
        rhs = apply_gate(rhs, g)
    for side in (lhs, rhs):
        _check_leakage(side, leakage_threshold, "verify_cubic_decomposition")
    return abs(lhs.overlap(rhs)) ** 2
