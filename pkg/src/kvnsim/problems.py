"""Builders for the case-study problems: oscillator, coupled network, KdV."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .classical import (
    Trajectory,
    analytic_ho,
    coupled_network_exact,
    integrate_rk4,
    kdv_soliton,
)
from .errors import DimensionError
from .phase_model import KvnHamiltonian, PolyVectorField, build_kvn_hamiltonian

KDV_STABILITY = 0.1  # explicit RK4 on the dispersive stencil: dt <= C * dx^3


@dataclass(frozen=True, eq=False)
class ProblemBundle:
    name: str
    field: PolyVectorField
    hamiltonian: KvnHamiltonian
    default_u0: np.ndarray
    oracle: Callable[[np.ndarray, np.ndarray], Trajectory]
    recommended_backend: str
    params: dict = field(default_factory=dict)

    @property
    def n_modes(self):
        return self.field.n_vars


def _bundle(name, f, u0, oracle, params):
    h = build_kvn_hamiltonian(f)
    backend = "gaussian" if h.is_gaussian else "fock"
    return ProblemBundle(name, f, h, np.asarray(u0, dtype=float), oracle, backend, params)


def make_harmonic_oscillator(m=1.0, omega=1.0):
    if m <= 0:
        raise ValueError("mass must be positive")
    if omega < 0:
        raise ValueError("omega must be non-negative")
    f = PolyVectorField(2, [[0.0, 1.0 / m], [-m * omega**2, 0.0]])

    def oracle(u0, times):
        return analytic_ho(m, omega, u0, times)

    return _bundle("ho", f, [1.0, 0.0], oracle, {"m": m, "omega": omega})


def coupling_constants(springs, couplings, variant="direct"):
    """Return the stiffness matrix with ``xi_j`` on the diagonal, ``xi_jk`` off it.

    ``xi_jk = -2 kappa_jk``. With ``variant="direct"``,
    ``xi_j = kappa_j + sum_k kappa_jk``; with ``variant="energy"`` the
    diagonal is ``kappa_j + 2 sum_k kappa_jk``, which is what the pairwise
    potential ``sum_{j<k} kappa_jk (u_j - u_k)^2`` actually produces.
    """
    springs = np.asarray(springs, dtype=float)
    kap = np.array(couplings, dtype=float)
    n = springs.size
    if kap.shape != (n, n):
        raise DimensionError(f"couplings must be {n}x{n}")
    if not np.allclose(kap, kap.T, rtol=0, atol=1e-15):
        raise ValueError("couplings must be symmetric")
    np.fill_diagonal(kap, 0.0)
    factor = {"direct": 1.0, "energy": 2.0}[variant]
    xi = -2.0 * kap
    np.fill_diagonal(xi, springs + factor * kap.sum(axis=1))
    return xi


def make_coupled_network(masses, springs, couplings=None, variant="direct"):
    masses = np.asarray(masses, dtype=float)
    n = masses.size
    if np.any(masses <= 0):
        raise ValueError("masses must be positive")
    if couplings is None:
        couplings = np.zeros((n, n))
    xi = coupling_constants(springs, couplings, variant)
    a = np.zeros((2 * n, 2 * n))
    a[:n, n:] = np.diag(1.0 / masses)
    a[n:, :n] = -xi
    f = PolyVectorField(2 * n, a)
    u0 = np.zeros(2 * n)
    u0[0] = 1.0

    def oracle(u, times):
        return coupled_network_exact(masses, xi, u, times)

    params = {"masses": masses.tolist(), "springs": np.asarray(springs, float).tolist(),
              "couplings": np.asarray(couplings, float).tolist(), "variant": variant}
    return _bundle("coupled", f, u0, oracle, params)


def kdv_field(n, dx, variant="corrected"):
    """Periodic central-difference semi-discretization of KdV on ``n`` points.

    ``paper``:     v_j = -3/dx (u_{j+1}^2 - u_{j-1}^2)
                         - (u_{j-2} - 2u_{j-1} + 2u_{j+1} - u_{j+2}) / (2 dx^3)
    ``corrected``: v_j = 3/(2dx) (u_{j+1}^2 - u_{j-1}^2)
                         - (u_{j+2} - 2u_{j+1} + 2u_{j-1} - u_{j-2}) / (2 dx^3)
    """
    if n < 3:
        raise ValueError("KdV grid needs at least 3 points")
    if dx <= 0:
        raise ValueError("dx must be positive")
    if variant == "paper":
        nonlin = -3.0 / dx
        stencil = {-2: 1.0, -1: -2.0, 1: 2.0, 2: -1.0}
    elif variant == "corrected":
        nonlin = 1.5 / dx
        stencil = {-2: -1.0, -1: 2.0, 1: -2.0, 2: 1.0}
    else:
        raise ValueError(f"unknown KdV variant {variant!r}")
    a = np.zeros((n, n))
    quad = []
    disp = -1.0 / (2.0 * dx**3)
    for j in range(n):
        for off, w in stencil.items():
            a[j, (j + off) % n] += disp * w
        quad.append((j, (j + 1) % n, (j + 1) % n, nonlin))
        quad.append((j, (j - 1) % n, (j - 1) % n, -nonlin))
    return PolyVectorField(n, a, tuple(quad))


def make_kdv(n=4, dx=1.0, variant="corrected"):
    f = kdv_field(n, dx, variant)
    x = np.arange(n) * dx
    length = n * dx
    if variant == "corrected":
        u0 = kdv_soliton(1.0, x, 0.0, x0=0.5 * length, period=length)
    else:
        width = max(2.0 * dx, length / 8.0)
        u0 = 0.1 * np.exp(-(((x - 0.5 * length) / width) ** 2))
    dt = min(KDV_STABILITY * dx**3, 1e-2)

    def oracle(u, times):
        times = np.asarray(times, dtype=float)
        return integrate_rk4(f, u, times[-1], dt, times=times, max_dt=KDV_STABILITY * dx**3)

    return _bundle("kdv", f, u0, oracle, {"n": n, "dx": dx, "variant": variant})


def make_from_field(f, name="custom", u0=None, dt=1e-3):
    """Bundle for an arbitrary field with an RK4 oracle."""
    u0 = np.zeros(f.n_vars) if u0 is None else u0

    def oracle(u, times):
        times = np.asarray(times, dtype=float)
        return integrate_rk4(f, u, times[-1], dt, times=times)

    return _bundle(name, f, u0, oracle, {})


PROBLEMS = {
    "ho": make_harmonic_oscillator,
    "coupled": make_coupled_network,
    "kdv": make_kdv,
}


def make_problem(name, **params):
    try:
        builder = PROBLEMS[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None
    return builder(**params)
