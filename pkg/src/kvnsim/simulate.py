"""Run a problem on a backend and compare ``<Q_j(t)>`` with the classical oracle."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fock
from .errors import ConfigError, UnsupportedHamiltonianError
from .gaussian import GaussianState, apply_gate, exact_propagator, quadrature_expectations
from .trotter import schedule_symplectic, trotterize

log = logging.getLogger(__name__)

BACKENDS = ("gaussian", "fock", "both")
TROTTER_MODES = ("exact", "cx", "tms_bs", "coupled", "kdv")
CSV_HEADER = ("t", "mode", "mean_q", "var_q", "classical_u")


@dataclass(frozen=True, eq=False)
class SimulationResult:
    backend: str
    times: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    classical: np.ndarray
    max_leakage: float = 0.0

    @property
    def deviation(self):
        return np.abs(self.means - self.classical)

    @property
    def max_deviation(self):
        return float(self.deviation.max(initial=0.0))

    def rows(self):
        for i, t in enumerate(self.times):
            for j in range(self.means.shape[1]):
                yield t, j, self.means[i, j], self.variances[i, j], self.classical[i, j]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for t, j, mu, var, u in self.rows():
            w.writerow([f"{t:.17g}", j, f"{mu:.17g}", f"{var:.17g}", f"{u:.17g}"])
        return buf.getvalue()

    def write_csv(self, path):
        Path(path).write_text(self.to_csv(), encoding="utf-8")


def read_csv(path):
    """Load a trajectory CSV back into ``(times, means, variances, classical)``."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    times = sorted({float(r["t"]) for r in rows})
    n = 1 + max(int(r["mode"]) for r in rows)
    out = {k: np.empty((len(times), n)) for k in ("mean_q", "var_q", "classical_u")}
    index = {t: i for i, t in enumerate(times)}
    for r in rows:
        i, j = index[float(r["t"])], int(r["mode"])
        for k in out:
            out[k][i, j] = float(r[k])
    return np.array(times), out["mean_q"], out["var_q"], out["classical_u"]


def sample_times(t_end, samples):
    if t_end < 0:
        raise ConfigError("t_end must be non-negative")
    if samples < 1:
        raise ConfigError("need at least one sample time")
    if samples == 1:
        return np.array([float(t_end)])
    return np.linspace(0.0, float(t_end), int(samples))


def _gaussian_run(h, u0, times, squeezing, trotter, p):
    if not h.is_gaussian:
        raise UnsupportedHamiltonianError(
            "the Gaussian backend cannot represent cubic terms; use --backend fock"
        )
    state0 = GaussianState.squeezed_displaced(u0, squeezing)
    means, variances = [], []
    for t in times:
        if trotter == "exact":
            gate = exact_propagator(h, t)
        else:
            gate = schedule_symplectic(trotterize(h, trotter, t, p))
        mu, var = quadrature_expectations(apply_gate(state0, gate))
        means.append(mu)
        variances.append(var)
    return np.array(means), np.array(variances), 0.0


def _fock_run(h, u0, times, squeezing, trotter, p, cutoff, leakage_threshold):
    state0 = fock.prepare_initial(u0, squeezing, cutoff, leakage_threshold=leakage_threshold)
    leak = state0.leakage
    means, variances = [], []
    if trotter == "exact":
        op = fock.hamiltonian_matrix(h, cutoff=cutoff)
        state, t_prev = state0, 0.0
        for t in times:
            if t > t_prev:
                state = fock.evolve(state, op, t - t_prev, leakage_threshold=leakage_threshold)
                t_prev = t
            leak = max(leak, state.leakage)
            mu, var = fock.quadrature_moments(state)
            means.append(mu)
            variances.append(var)
    else:
        for t in times:
            state = fock.apply_schedule(state0, trotterize(h, trotter, t, p), leakage_threshold)
            leak = max(leak, state.leakage)
            mu, var = fock.quadrature_moments(state)
            means.append(mu)
            variances.append(var)
    return np.array(means), np.array(variances), leak


def simulate(bundle, backend="gaussian", trotter="exact", p=1, t_end=1.0, samples=11,
             cutoff=8, squeezing=0.0, leakage_threshold=fock.DEFAULT_LEAKAGE_THRESHOLD,
             u0=None, times=None):
    """Return one :class:`SimulationResult` per backend run (two for ``"both"``)."""
    if backend not in BACKENDS:
        raise ConfigError(f"backend must be one of {BACKENDS}")
    if trotter not in TROTTER_MODES:
        raise ConfigError(f"trotter must be one of {TROTTER_MODES}")
    if int(p) < 1:
        raise ConfigError("p must be >= 1")
    h = bundle.hamiltonian
    if backend in ("gaussian", "both") and not h.is_gaussian:
        raise UnsupportedHamiltonianError(
            f"problem {bundle.name!r} has cubic terms; the Gaussian backend cannot run it"
        )
    u0 = bundle.default_u0 if u0 is None else np.asarray(u0, dtype=float)
    if u0.shape != (bundle.n_modes,):
        raise ConfigError(f"u0 must have {bundle.n_modes} entries")
    times = sample_times(t_end, samples) if times is None else np.asarray(times, dtype=float)
    classical = bundle.oracle(u0, times).values

    results = []
    if backend in ("gaussian", "both"):
        log.info("gaussian backend: %d samples, trotter=%s", times.size, trotter)
        m, v, leak = _gaussian_run(h, u0, times, squeezing, trotter, p)
        results.append(SimulationResult("gaussian", times, m, v, classical, leak))
    if backend in ("fock", "both"):
        log.info("fock backend: cutoff %d, %d modes, %d samples", cutoff, h.n_modes, times.size)
        m, v, leak = _fock_run(h, u0, times, squeezing, trotter, p, cutoff, leakage_threshold)
        results.append(SimulationResult("fock", times, m, v, classical, leak))
    return results
