"""Symplectic simulation of quadratic KvN Hamiltonians.

A Gaussian state is tracked through its quadrature means and covariance
matrix, in the ordering ``r = (Q_1..Q_N, P_1..P_N)``. A gate ``U`` acts in the
Heisenberg picture as ``U^dag r U = S r + d``.

Gate conventions (all angles/strengths are dimensionless integrated values):

==========  =====================================  ==============================
kind        unitary                                Heisenberg action
==========  =====================================  ==============================
BS          exp(-i t (P_j Q_k - Q_j P_k))          rotates (Q_j,Q_k), (P_j,P_k)
TMS         exp(-i r (P_j Q_k + Q_j P_k))          Q_j+Q_k, P_j-P_k grow as e^r
CX          exp(-i s Q_j P_k)                      Q_k += s Q_j, P_j -= s P_k
QQ          exp(+i b Q_j Q_k)                      P_j += b Q_k, P_k += b Q_j
DISPLACE    exp(-i x P_j)                          Q_j += x
==========  =====================================  ==============================

With the TMS convention above, the OPO map ``Q_1 - Q_2 -> e^r (Q_1 - Q_2)``
corresponds to a TMS strength of ``-r``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import DimensionError, UnsupportedHamiltonianError

GAUSSIAN_KINDS = ("BS", "TMS", "CX", "QQ", "DISPLACE")


def symplectic_form(n_modes):
    eye = np.eye(n_modes)
    zero = np.zeros((n_modes, n_modes))
    return np.block([[zero, eye], [-eye, zero]])


def symplectic_residual(s):
    n = s.shape[0] // 2
    omega = symplectic_form(n)
    return float(np.linalg.norm(s @ omega @ s.T - omega))


@dataclass(frozen=True, eq=False)
class GaussianState:
    n_modes: int
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        n = int(self.n_modes)
        mean = np.array(self.mean, dtype=float)
        cov = np.array(self.cov, dtype=float)
        if mean.shape != (2 * n,) or cov.shape != (2 * n, 2 * n):
            raise DimensionError(f"state arrays do not match n_modes={n}")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "n_modes", n)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @classmethod
    def vacuum(cls, n_modes):
        return cls(n_modes, np.zeros(2 * n_modes), 0.5 * np.eye(2 * n_modes))

    @classmethod
    def squeezed_displaced(cls, u0, squeezing=0.0):
        """Product state with ``<Q_j> = u0_j``, ``<P_j> = 0`` and
        ``Var(Q_j) = exp(-2 s)/2``, ``Var(P_j) = exp(2 s)/2``."""
        u0 = np.asarray(u0, dtype=float)
        n = u0.size
        s = np.broadcast_to(np.asarray(squeezing, dtype=float), (n,))
        mean = np.concatenate([u0, np.zeros(n)])
        cov = np.diag(np.concatenate([0.5 * np.exp(-2 * s), 0.5 * np.exp(2 * s)]))
        return cls(n, mean, cov)

    def uncertainty_min_eig(self):
        """Smallest eigenvalue of ``cov + (i/2) Omega``; non-negative for physical states."""
        herm = self.cov + 0.5j * symplectic_form(self.n_modes)
        return float(np.linalg.eigvalsh(herm).min())


@dataclass(frozen=True, eq=False)
class SymplecticGate:
    S: np.ndarray
    d: np.ndarray = None

    def __post_init__(self):
        s = np.array(self.S, dtype=float)
        if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape[0] % 2:
            raise DimensionError("S must be a square matrix of even size")
        d = np.zeros(s.shape[0]) if self.d is None else np.array(self.d, dtype=float)
        if d.shape != (s.shape[0],):
            raise DimensionError("displacement length must match S")
        s.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "S", s)
        object.__setattr__(self, "d", d)

    @property
    def n_modes(self):
        return self.S.shape[0] // 2

    @classmethod
    def identity(cls, n_modes):
        return cls(np.eye(2 * n_modes))

    def then(self, other):
        """Gate equal to applying ``self`` first and ``other`` second."""
        return SymplecticGate(other.S @ self.S, other.S @ self.d + other.d)

    def symplectic_error(self):
        return symplectic_residual(self.S)


def exact_propagator(h, t):
    """Symplectic gate of ``exp(-i H t)`` for a quadratic KvN Hamiltonian.

    The Heisenberg equations ``dr/dt = Omega (M r + c)`` integrate to
    ``S = expm(Omega M t)``; the displacement comes from an augmented
    exponential so that linear terms need no invertibility assumption.
    """
    if not h.is_gaussian:
        raise UnsupportedHamiltonianError(
            "Hamiltonian has cubic terms; use the Fock backend (kvnsim.fock.evolve)"
        )
    n2 = 2 * h.n_modes
    omega = symplectic_form(h.n_modes)
    gen = np.zeros((n2 + 1, n2 + 1))
    gen[:n2, :n2] = omega @ h.quadratic
    gen[:n2, n2] = omega @ h.linear
    big = expm(gen * float(t))
    return SymplecticGate(big[:n2, :n2], big[:n2, n2])


def apply_gate(state, gate):
    if gate.S.shape[0] != 2 * state.n_modes:
        raise DimensionError(
            f"gate acts on {gate.n_modes} modes, state has {state.n_modes}"
        )
    s = gate.S
    return GaussianState(state.n_modes, s @ state.mean + gate.d, s @ state.cov @ s.T)


def _embed_two_mode(n_modes, j, k, block_q, block_p, cross_qp=None, cross_pq=None):
    """Place 2x2 blocks acting on (j, k) into a 2N identity."""
    s = np.eye(2 * n_modes)
    qi = [j, k]
    pi = [n_modes + j, n_modes + k]
    s[np.ix_(qi, qi)] = block_q
    s[np.ix_(pi, pi)] = block_p
    if cross_qp is not None:
        s[np.ix_(qi, pi)] = cross_qp
    if cross_pq is not None:
        s[np.ix_(pi, qi)] = cross_pq
    return s


def gate_for(kind, modes, param, n_modes, p_shift=0.0):
    """Return the ``SymplecticGate`` for a named Gaussian gate.

    ``modes`` is ``(j, k)`` for two-mode gates and ``(j,)`` for ``DISPLACE``.
    ``p_shift`` adds a momentum displacement for ``DISPLACE``.
    """
    kind = kind.upper()
    modes = tuple(int(m) for m in modes)
    for m in modes:
        if not 0 <= m < n_modes:
            raise DimensionError(f"mode {m} out of range for {n_modes} modes")
    param = float(param)
    if kind == "DISPLACE":
        if len(modes) != 1:
            raise ValueError("DISPLACE acts on exactly one mode")
        d = np.zeros(2 * n_modes)
        d[modes[0]] = param
        d[n_modes + modes[0]] = p_shift
        return SymplecticGate(np.eye(2 * n_modes), d)
    if kind not in GAUSSIAN_KINDS:
        raise ValueError(f"unknown Gaussian gate kind {kind!r}")
    if len(modes) != 2:
        raise ValueError(f"{kind} acts on exactly two modes")
    j, k = modes
    if j == k:
        raise ValueError(f"{kind} needs two distinct modes, got ({j}, {k})")

    if kind == "BS":
        c, s = np.cos(param), np.sin(param)
        rot = np.array([[c, s], [-s, c]])
        mat = _embed_two_mode(n_modes, j, k, rot, rot)
    elif kind == "TMS":
        ch, sh = np.cosh(param), np.sinh(param)
        mat = _embed_two_mode(
            n_modes, j, k, np.array([[ch, sh], [sh, ch]]), np.array([[ch, -sh], [-sh, ch]])
        )
    elif kind == "CX":
        mat = _embed_two_mode(
            n_modes, j, k, np.array([[1.0, 0.0], [param, 1.0]]), np.array([[1.0, -param], [0.0, 1.0]])
        )
    else:  # QQ
        mat = _embed_two_mode(
            n_modes, j, k, np.eye(2), np.eye(2), cross_pq=np.array([[0.0, param], [param, 0.0]])
        )
    return SymplecticGate(mat)


def single_mode_squeezer(n_modes, j, s):
    """``Q_j -> e^{-s} Q_j``, ``P_j -> e^{s} P_j``."""
    mat = np.eye(2 * n_modes)
    mat[j, j] = np.exp(-s)
    mat[n_modes + j, n_modes + j] = np.exp(s)
    return SymplecticGate(mat)


def quadrature_expectations(state):
    """Return ``(<Q_j>, Var(Q_j))`` for every mode."""
    n = state.n_modes
    return np.array(state.mean[:n]), np.array(np.diag(state.cov)[:n])
