"""Polynomial vector fields and their Koopman-von Neumann Hamiltonians.

A classical system ``du/dt = v(u)`` over ``N`` real variables is embedded into
``N`` qumodes. Each classical variable ``u_j`` is carried by the amplitude
quadrature ``Q_j`` of mode ``j``, and the generator of the dynamics is the
symmetrized operator

    H = 1/2 * sum_j (P_j v_j(Q) + v_j(Q) P_j).

Conventions (used throughout the package): hbar = 1, ``[Q_j, P_k] = i delta_jk``,
quadrature vector ``r = (Q_1..Q_N, P_1..P_N)`` and symplectic form
``Omega = [[0, I], [-I, 0]]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError

QuadTerm = tuple[int, int, int, float]


def _canonical_quadratic(terms, n_vars):
    out = []
    for entry in terms:
        j, k, l, c = entry
        j, k, l = int(j), int(k), int(l)
        for idx in (j, k, l):
            if not 0 <= idx < n_vars:
                raise DimensionError(f"quadratic term index {idx} out of range for n_vars={n_vars}")
        if k > l:
            k, l = l, k
        out.append((j, k, l, float(c)))
    return tuple(out)


@dataclass(frozen=True, eq=False)
class PolyVectorField:
    """Vector field ``v(u) = constant + linear @ u + quadratic monomials``.

    ``quadratic`` holds entries ``(j, k, l, c)`` meaning ``v_j += c * u_k * u_l``;
    entries are stored with ``k <= l``. Duplicate entries are allowed and add up.
    """

    n_vars: int
    linear: np.ndarray
    quadratic: tuple[QuadTerm, ...] = ()
    constant: np.ndarray = None

    def __post_init__(self):
        n = int(self.n_vars)
        if n <= 0:
            raise DimensionError("n_vars must be positive")
        lin = np.array(self.linear, dtype=float)
        if lin.size == n * n and lin.ndim == 1:
            lin = lin.reshape(n, n)
        if lin.shape != (n, n):
            raise DimensionError(f"linear part must be {n}x{n}, got {lin.shape}")
        const = np.zeros(n) if self.constant is None else np.array(self.constant, dtype=float)
        if const.shape != (n,):
            raise DimensionError(f"constant part must have length {n}, got {const.shape}")
        lin.setflags(write=False)
        const.setflags(write=False)
        object.__setattr__(self, "n_vars", n)
        object.__setattr__(self, "linear", lin)
        object.__setattr__(self, "constant", const)
        object.__setattr__(self, "quadratic", _canonical_quadratic(self.quadratic, n))

    @classmethod
    def zero(cls, n_vars):
        return cls(n_vars, np.zeros((n_vars, n_vars)))

    @property
    def degree(self):
        if any(c != 0.0 for *_, c in self.quadratic):
            return 2
        if np.any(self.linear):
            return 1
        return 0

    def __call__(self, u):
        return evaluate_field(self, u)

    def __add__(self, other):
        if not isinstance(other, PolyVectorField):
            return NotImplemented
        if other.n_vars != self.n_vars:
            raise DimensionError("cannot add fields of different dimension")
        return PolyVectorField(
            self.n_vars,
            self.linear + other.linear,
            self.quadratic + other.quadratic,
            self.constant + other.constant,
        )

    def __mul__(self, alpha):
        alpha = float(alpha)
        return PolyVectorField(
            self.n_vars,
            alpha * self.linear,
            tuple((j, k, l, alpha * c) for j, k, l, c in self.quadratic),
            alpha * self.constant,
        )

    __rmul__ = __mul__

    def divergence(self, u):
        """Return ``sum_j dv_j/du_j`` at ``u``."""
        u = np.asarray(u, dtype=float)
        div = float(np.trace(self.linear))
        for j, k, l, c in self.quadratic:
            if k == j:
                div += c * u[l]
            if l == j:
                div += c * u[k]
        return div

    def to_dict(self):
        return {
            "n_vars": self.n_vars,
            "linear": self.linear.tolist(),
            "quadratic": [[j, k, l, c] for j, k, l, c in self.quadratic],
            "constant": self.constant.tolist(),
        }

    @classmethod
    def from_dict(cls, data):
        n = int(data["n_vars"])
        linear = data.get("linear")
        if linear is None:
            linear = np.zeros((n, n))
        return cls(
            n,
            np.asarray(linear, dtype=float),
            tuple(tuple(t) for t in data.get("quadratic", ())),
            data.get("constant"),
        )


def load_field(path):
    """Read a vector field from a JSON or YAML file.

    Keys: ``n_vars``; ``linear`` (row-major, nested rows or a flat list of
    ``n_vars**2`` numbers, default zero); ``quadratic`` (list of ``[j, k, l, c]``,
    zero-based indices, default empty); ``constant`` (default zero).
    """
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() in (".yaml", ".yml"):
        import yaml

        data = yaml.safe_load(text)
    else:
        data = json.loads(text)
    return PolyVectorField.from_dict(data)


def save_field(f, path):
    Path(path).write_text(json.dumps(f.to_dict(), indent=2))


def evaluate_field(f, u):
    u = np.asarray(u, dtype=float)
    if u.shape != (f.n_vars,):
        raise DimensionError(f"expected state of length {f.n_vars}, got shape {u.shape}")
    out = f.constant + f.linear @ u
    for j, k, l, c in f.quadratic:
        out[j] += c * u[k] * u[l]
    return out


@dataclass(frozen=True, eq=False)
class KvnHamiltonian:
    """Operator ``1/2 r^T M r + linear^T r + sum_cubic + scalar_shift``.

    Each cubic term ``(j, k, l, c)`` stands for ``c/2 (P_j Q_k Q_l + Q_k Q_l P_j)``.
    The quadratic form is read in Weyl (symmetric) order, so every stored term
    is Hermitian on its own and the divergence correction of the
    ``(P v + v P)/2`` ordering is already contained in the terms; the scalar
    shift is kept for completeness and is zero for every built Hamiltonian.
    """

    n_modes: int
    quadratic: np.ndarray
    cubic_terms: tuple[QuadTerm, ...] = ()
    linear: np.ndarray = None
    scalar_shift: float = 0.0

    def __post_init__(self):
        n = int(self.n_modes)
        m = np.array(self.quadratic, dtype=float)
        if m.shape != (2 * n, 2 * n):
            raise DimensionError(f"quadratic matrix must be {2 * n}x{2 * n}")
        if not np.allclose(m, m.T, atol=1e-12, rtol=0):
            raise ValueError("quadratic matrix must be symmetric")
        lin = np.zeros(2 * n) if self.linear is None else np.array(self.linear, dtype=float)
        if lin.shape != (2 * n,):
            raise DimensionError(f"linear vector must have length {2 * n}")
        m.setflags(write=False)
        lin.setflags(write=False)
        object.__setattr__(self, "n_modes", n)
        object.__setattr__(self, "quadratic", m)
        object.__setattr__(self, "linear", lin)
        object.__setattr__(self, "cubic_terms", _canonical_quadratic(self.cubic_terms, n))

    @property
    def is_gaussian(self):
        return not any(c != 0.0 for *_, c in self.cubic_terms)

    @property
    def degree(self):
        if not self.is_gaussian:
            return 3
        if np.any(self.quadratic):
            return 2
        return 1 if np.any(self.linear) else 0

    def drift_matrix(self):
        """Return the ``(P_j, Q_k)`` block ``A`` with ``H_quad = sum A_jk P_j Q_k``."""
        n = self.n_modes
        return np.array(self.quadratic[n:, :n])

    def __add__(self, other):
        if not isinstance(other, KvnHamiltonian):
            return NotImplemented
        return KvnHamiltonian(
            self.n_modes,
            self.quadratic + other.quadratic,
            self.cubic_terms + other.cubic_terms,
            self.linear + other.linear,
            self.scalar_shift + other.scalar_shift,
        )

    def __mul__(self, alpha):
        alpha = float(alpha)
        return KvnHamiltonian(
            self.n_modes,
            alpha * self.quadratic,
            tuple((j, k, l, alpha * c) for j, k, l, c in self.cubic_terms),
            alpha * self.linear,
            alpha * self.scalar_shift,
        )

    __rmul__ = __mul__

    def same_terms(self, other, atol=0.0):
        """Compare term-by-term after merging duplicate cubic monomials."""
        if self.n_modes != other.n_modes:
            return False

        def merged(terms):
            acc = {}
            for j, k, l, c in terms:
                acc[(j, k, l)] = acc.get((j, k, l), 0.0) + c
            return acc

        a, b = merged(self.cubic_terms), merged(other.cubic_terms)
        keys = set(a) | set(b)
        return (
            np.allclose(self.quadratic, other.quadratic, atol=atol, rtol=0)
            and np.allclose(self.linear, other.linear, atol=atol, rtol=0)
            and all(abs(a.get(k, 0.0) - b.get(k, 0.0)) <= atol for k in keys)
            and abs(self.scalar_shift - other.scalar_shift) <= atol
        )

    def fingerprint(self):
        """Short stable hash of the coefficients, used as schedule metadata."""
        import hashlib

        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.quadratic).tobytes())
        h.update(np.ascontiguousarray(self.linear).tobytes())
        h.update(repr(self.cubic_terms).encode())
        return h.hexdigest()[:16]


def build_kvn_hamiltonian(f):
    """Build the KvN Hamiltonian of a polynomial vector field.

    A linear contribution ``A_jk u_k`` to ``v_j`` becomes the symmetrized
    product ``A_jk (P_j Q_k + Q_k P_j)/2``, i.e. entries ``M[N+j, k]`` and
    ``M[k, N+j]`` of the quadratic form. Quadratic monomials become cubic
    terms ``P_j Q_k Q_l`` and a constant ``b_j`` becomes ``b_j P_j``.
    """
    n = f.n_vars
    m = np.zeros((2 * n, 2 * n))
    m[n:, :n] = f.linear
    m[:n, n:] = f.linear.T
    lin = np.zeros(2 * n)
    lin[n:] = f.constant
    cubic = tuple(t for t in f.quadratic if t[3] != 0.0)
    return KvnHamiltonian(n, m, cubic, lin, 0.0)


def _interior_mask(n_modes, cutoff, margin):
    occ = np.indices((cutoff,) * n_modes).reshape(n_modes, -1)
    return np.all(occ < cutoff - margin, axis=0)


def field_operator(f, ops, j):
    """Return the truncated operator ``v_j(Q)`` as a sparse matrix."""
    from .fock import compressed_monomial

    dim = ops.dim
    out = f.constant[j] * _sparse_identity(dim)
    for k in range(f.n_vars):
        if f.linear[j, k] != 0.0:
            out = out + f.linear[j, k] * ops.Q[k]
    for jj, k, l, c in f.quadratic:
        if jj == j and c != 0.0:
            out = out + c * compressed_monomial(ops, {k: "QQ"} if k == l else {k: "Q", l: "Q"})
    return out


def _sparse_identity(dim):
    import scipy.sparse as sp

    return sp.identity(dim, dtype=complex, format="csr")


def verify_heisenberg_consistency(h, f, cutoff, max_dim=2**18):
    """Check ``[Q_j, H]/i = v_j(Q)`` on the interior of a truncated Fock space.

    Returns an array of per-mode Frobenius norms of the residual restricted to
    number states whose occupations are all far enough below the cutoff that
    every operator product involved is exact: occupations below
    ``cutoff - deg(H) - 1``, leaving room for ``deg(H)`` ladder steps of ``H``
    plus one for ``Q_j``.
    """
    from .fock import build_operators, hamiltonian_matrix

    if h.n_modes != f.n_vars:
        raise DimensionError("Hamiltonian and field have different sizes")
    ops = build_operators(h.n_modes, cutoff, max_dim=max_dim)
    hmat = hamiltonian_matrix(h, h.n_modes, cutoff, max_dim=max_dim).matrix
    margin = h.degree + 1
    mask = _interior_mask(h.n_modes, cutoff, margin)
    if not mask.any():
        raise ValueError(f"cutoff {cutoff} leaves no interior states for margin {margin}")
    cols = np.flatnonzero(mask)
    residuals = np.empty(h.n_modes)
    for j in range(h.n_modes):
        q = ops.Q[j]
        comm = (q @ hmat - hmat @ q) * (-1j)
        r = (comm - field_operator(f, ops, j))[:, cols]
        residuals[j] = np.sqrt(float(np.sum(np.abs(r.data) ** 2))) if r.nnz else 0.0
    return residuals
