"""Classical reference solutions used as oracles for the quantum backends."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from .errors import BlowUpError, DimensionError


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.array(self.times, dtype=float).reshape(-1)
        v = np.array(self.values, dtype=float)
        if v.ndim == 1:
            v = v.reshape(t.size, -1)
        if v.shape[0] != t.size:
            raise DimensionError("one value row per time sample is required")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise BlowUpError(t[np.all(np.isfinite(v), axis=1)].max(initial=t[0]))
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def final(self):
        return self.values[-1]

    def __len__(self):
        return self.times.size


def _rk4_step(f, u, h):
    k1 = f(u)
    k2 = f(u + 0.5 * h * k1)
    k3 = f(u + 0.5 * h * k2)
    k4 = f(u + h * k3)
    return u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_rk4(field, u0, t_end, dt, times=None, max_dt=None):
    """Classic fourth-order Runge-Kutta.

    ``field`` is a :class:`~kvnsim.phase_model.PolyVectorField` or any callable
    ``v(u)``. Without ``times`` every step is recorded; with ``times`` the
    solution is sampled there, each interval covered by equal steps no longer
    than ``dt``. ``max_dt`` is a stability bound; exceeding it only warns.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if max_dt is not None and dt > max_dt:
        warnings.warn(f"dt={dt:g} exceeds the stability bound {max_dt:g}", RuntimeWarning, stacklevel=2)
    u = np.array(u0, dtype=float)
    if times is None:
        n = max(1, math.ceil(t_end / dt - 1e-9))
        times = np.linspace(0.0, t_end, n + 1)
    times = np.asarray(times, dtype=float)
    out = np.empty((times.size, u.size))
    t = 0.0
    for i, target in enumerate(times):
        span = target - t
        if span < -1e-15:
            raise ValueError("sample times must be non-decreasing and start at >= 0")
        if span > 0:
            n = max(1, math.ceil(span / dt - 1e-9))
            h = span / n
            for _ in range(n):
                with np.errstate(over="ignore", invalid="ignore"):
                    nxt = _rk4_step(field, u, h)
                if not np.all(np.isfinite(nxt)):
                    raise BlowUpError(t)
                u = nxt
                t += h
            t = target
        out[i] = u
    return Trajectory(times, out)


def rk4_error_estimate(field, u0, t_end, dt):
    """Richardson estimate ``|u_dt - u_{dt/2}| / 15`` of the final-state error
    of the ``dt/2`` run."""
    a = integrate_rk4(field, u0, t_end, dt).final
    b = integrate_rk4(field, u0, t_end, dt / 2).final
    return float(np.max(np.abs(a - b)) / 15.0)


def analytic_ho(m, omega, u0, times):
    """Closed-form oscillator ``u1' = u2/m``, ``u2' = -m w^2 u1``."""
    if omega < 0:
        raise ValueError("omega must be non-negative")
    t = np.asarray(times, dtype=float)
    x0, p0 = float(u0[0]), float(u0[1])
    if omega == 0:
        return Trajectory(t, np.column_stack([x0 + p0 * t / m, np.full_like(t, p0)]))
    c, s = np.cos(omega * t), np.sin(omega * t)
    x = x0 * c + p0 / (m * omega) * s
    p = p0 * c - m * omega * x0 * s
    return Trajectory(t, np.column_stack([x, p]))


def ho_energy(m, omega, u):
    u = np.asarray(u)
    return u[..., 1] ** 2 / (2 * m) + 0.5 * m * omega**2 * u[..., 0] ** 2


def coupled_network_exact(masses, xi, u0, times):
    """Exact solution of ``x' = M^-1 y``, ``y' = -Xi x`` by normal modes.

    ``xi`` is the full symmetric stiffness matrix (``xi_j`` on the diagonal,
    ``xi_jk`` off it). The generalized eigenproblem ``Xi w = lam M w`` gives
    decoupled coordinates that evolve as cos/sin (``lam > 0``), cosh/sinh
    (``lam < 0``) or free drift (``lam = 0``).
    """
    masses = np.asarray(masses, dtype=float)
    xi = np.asarray(xi, dtype=float)
    n = masses.size
    if xi.shape != (n, n):
        raise DimensionError(f"xi must be {n}x{n}")
    if not np.allclose(xi, xi.T):
        raise ValueError("xi must be symmetric")
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != (2 * n,):
        raise DimensionError(f"u0 must have length {2 * n}")
    t = np.asarray(times, dtype=float)
    lam, w = eigh(xi, np.diag(masses))  # w^T M w = I
    a0 = w.T @ (masses * u0[:n])        # modal displacement
    b0 = w.T @ u0[n:]                   # modal velocity (M^-1 y in modal coords)
    disp = np.empty((t.size, n))
    vel = np.empty((t.size, n))
    with np.errstate(over="ignore", invalid="ignore"):
        for i, lv in enumerate(lam):
            _modal(disp, vel, i, lv, a0[i], b0[i], t)
        x = disp @ w.T
        y = (vel @ w.T) * masses
    return Trajectory(t, np.hstack([x, y]))


def _modal(disp, vel, i, lv, a, b, t):
    if abs(lv) < 1e-14:
        disp[:, i] = a + b * t
        vel[:, i] = b
    elif lv > 0:
        om = math.sqrt(lv)
        disp[:, i] = a * np.cos(om * t) + b / om * np.sin(om * t)
        vel[:, i] = b * np.cos(om * t) - a * om * np.sin(om * t)
    else:
        ka = math.sqrt(-lv)
        disp[:, i] = a * np.cosh(ka * t) + b / ka * np.sinh(ka * t)
        vel[:, i] = b * np.cosh(ka * t) + a * ka * np.sinh(ka * t)


def kdv_soliton(c, x, t=0.0, x0=0.0, period=None):
    """Single soliton ``-(c/2) sech^2(sqrt(c) (x - c t - x0) / 2)`` of
    ``u_t - 6 u u_x + u_xxx = 0``; with ``period`` the distance is wrapped."""
    if c <= 0:
        raise ValueError("soliton speed must be positive")
    xi = np.asarray(x, dtype=float) - c * t - x0
    if period is not None:
        xi = (xi + 0.5 * period) % period - 0.5 * period
    return -0.5 * c / np.cosh(0.5 * math.sqrt(c) * xi) ** 2


def kdv_mass(u, dx):
    return float(np.sum(u) * dx)
