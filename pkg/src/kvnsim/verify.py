"""Invariant suites behind ``kvnsim verify``; each returns a JSON-ready report."""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import fock
from .gaussian import GaussianState, apply_gate, exact_propagator, gate_for, symplectic_residual
from .phase_model import verify_heisenberg_consistency
from .problems import make_coupled_network, make_harmonic_oscillator, make_kdv
from .trotter import schedule_symplectic, trotterize

log = logging.getLogger(__name__)

# Desk-scale defaults
HEISENBERG_TOL = 1e-10
CUBIC_ALPHA, CUBIC_T = 0.1, 0.1
CUBIC_CUTOFFS = (20, 30, 40)
CUBIC_FIDELITY = 1.0 - 1e-3
TROTTER_STEPS = (4, 8, 16, 32, 64)
TROTTER_MIN_ORDER = 0.9
BACKEND_CUTOFF = 30
SYMPLECTIC_TOL = 1e-10
NORM_TOL = 1e-9


@dataclass
class Check:
    name: str
    value: float
    threshold: float
    passed: bool
    detail: dict = field(default_factory=dict)


@dataclass
class SuiteReport:
    suite: str
    checks: list
    seconds: float = 0.0

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def to_dict(self):
        return {
            "suite": self.suite,
            "passed": self.passed,
            "seconds": self.seconds,
            "checks": [asdict(c) for c in self.checks],
        }


def _below(name, value, tol, **detail):
    value = float(value)
    return Check(name, value, tol, bool(value < tol), detail)


def heisenberg_problems():
    """The three case studies at the cutoffs used for the consistency check."""
    return [
        ("ho", make_harmonic_oscillator(1.0, 1.0), 12),
        ("coupled_n2", make_coupled_network([1.0, 1.0], [1.0, 1.5], [[0.0, 0.2], [0.2, 0.0]]), 6),
        ("kdv_n3", make_kdv(3, 1.0), 8),
    ]


def suite_heisenberg():
    checks = []
    for name, bundle, cutoff in heisenberg_problems():
        res = verify_heisenberg_consistency(bundle.hamiltonian, bundle.field, cutoff)
        checks.append(_below(name, res.max(), HEISENBERG_TOL, cutoff=cutoff, residuals=res.tolist()))
    return checks


def cubic_deficits(variant="exact", cutoffs=CUBIC_CUTOFFS, alpha=CUBIC_ALPHA, t=CUBIC_T,
                   leakage_threshold=fock.DEFAULT_LEAKAGE_THRESHOLD):
    return [
        1.0 - fock.verify_cubic_decomposition(alpha, t, c, variant=variant,
                                              leakage_threshold=leakage_threshold)
        for c in cutoffs
    ]


def suite_cubic40():
    exact = cubic_deficits("exact")
    literal = cubic_deficits("literal", leakage_threshold=None)
    monotone = all(b < a for a, b in zip(exact, exact[1:]))
    return [
        Check("fidelity_cutoff40", 1.0 - exact[-1], CUBIC_FIDELITY, bool(1.0 - exact[-1] >= CUBIC_FIDELITY),
              {"deficits": dict(zip(map(str, CUBIC_CUTOFFS), exact))}),
        Check("deficit_monotone", float(monotone), 1.0, monotone, {}),
        # informational: the coefficients as usually quoted do not close the identity
        Check("literal_coefficients_deficit", literal[-1], 1.0, True,
              {"deficits": dict(zip(map(str, CUBIC_CUTOFFS), literal))}),
    ]


def trotter_errors(decomposition, steps=TROTTER_STEPS, m=1.0, omega=2.0, tau=1.0):
    """Frobenius distance between the compiled and exact symplectic maps."""
    h = make_harmonic_oscillator(m, omega).hamiltonian
    exact = exact_propagator(h, tau).S
    return np.array([
        np.linalg.norm(schedule_symplectic(trotterize(h, decomposition, tau, p)).S - exact)
        for p in steps
    ])


def fitted_order(steps, errors):
    slope = np.polyfit(np.log(steps), np.log(errors), 1)[0]
    return float(-slope)


def suite_trotter():
    checks = []
    for dec in ("cx", "tms_bs"):
        err = trotter_errors(dec)
        order = fitted_order(TROTTER_STEPS, err)
        checks.append(Check(f"{dec}_order", order, TROTTER_MIN_ORDER, bool(order >= TROTTER_MIN_ORDER),
                            {"steps": list(TROTTER_STEPS), "errors": err.tolist(),
                             "ratios": (err[1:] / err[:-1]).tolist()}))
    return checks


def backend_comparison(cutoff=BACKEND_CUTOFF, u0=(1.0, 0.0), squeezing=0.3, t_end=5.0, samples=26):
    """Run the oscillator (m=1, w=1) exactly on both backends."""
    h = make_harmonic_oscillator(1.0, 1.0).hamiltonian
    times = np.linspace(0.0, t_end, samples)
    g0 = GaussianState.squeezed_displaced(u0, squeezing)
    op = fock.hamiltonian_matrix(h, cutoff=cutoff)
    state = fock.prepare_initial(u0, squeezing, cutoff, leakage_threshold=1e-8)
    dmean = dvar = leak = 0.0
    t_prev = 0.0
    for t in times:
        if t > t_prev:
            state = fock.evolve(state, op, t - t_prev, leakage_threshold=1e-8)
            t_prev = t
        g = apply_gate(g0, exact_propagator(h, t))
        mu_g, var_g = g.mean[:2], np.diag(g.cov)[:2]
        mu_f, var_f = fock.quadrature_moments(state)
        dmean = max(dmean, np.max(np.abs(mu_f - mu_g)))
        dvar = max(dvar, np.max(np.abs(var_f - var_g)))
        leak = max(leak, state.leakage)
    return dmean, dvar, leak


def suite_backends():
    dmean, dvar, leak = backend_comparison()
    return [
        _below("mean_agreement", dmean, 1e-6),
        _below("variance_agreement", dvar, 1e-5),
        _below("leakage", leak, 1e-8),
    ]


def generated_schedules():
    ho = make_harmonic_oscillator(1.0, 2.0).hamiltonian
    net = make_coupled_network([1.0, 2.0, 1.5], [1.0, 0.5, 2.0],
                               [[0, 0.3, 0.1], [0.3, 0, 0.2], [0.1, 0.2, 0]]).hamiltonian
    kdv = make_kdv(5, 1.0).hamiltonian
    return [
        trotterize(ho, "cx", 1.0, 4),
        trotterize(ho, "tms_bs", 1.0, 4),
        trotterize(net, "coupled", 1.0, 3),
        trotterize(kdv, "kdv", 0.1, 2, expand_cubic=True),
    ]


def suite_hygiene(seed=0):
    rng = np.random.default_rng(seed)
    worst_gate = 0.0
    for sched in generated_schedules():
        for g in sched.step_gates:
            if g.is_gaussian:
                worst_gate = max(worst_gate, symplectic_residual(gate_for(g.kind, g.modes, g.param, sched.n_modes).S))
    for kind in ("BS", "TMS", "CX", "QQ"):
        for param in rng.uniform(-2, 2, 8):
            worst_gate = max(worst_gate, symplectic_residual(gate_for(kind, (0, 2), param, 3).S))

    worst_norm = 0.0
    ho = make_harmonic_oscillator(1.0, 2.0)
    op = fock.hamiltonian_matrix(ho.hamiltonian, cutoff=20)
    psi = fock.prepare_initial((0.5, 0.0), 0.2, 20, leakage_threshold=None)
    worst_norm = max(worst_norm, abs(fock.evolve(psi, op, 1.0, steps=4, leakage_threshold=None).norm - 1.0))
    kdv = make_kdv(4, 1.0)
    op = fock.hamiltonian_matrix(kdv.hamiltonian, cutoff=8)
    psi = fock.prepare_initial(kdv.default_u0, 0.0, 8, leakage_threshold=None)
    worst_norm = max(worst_norm, abs(fock.evolve(psi, op, 0.2, steps=2, leakage_threshold=None).norm - 1.0))
    return [
        _below("symplectic_residual", worst_gate, SYMPLECTIC_TOL),
        _below("evolve_norm_drift", worst_norm, NORM_TOL),
    ]


SUITES = {
    "heisenberg": suite_heisenberg,
    "cubic40": suite_cubic40,
    "trotter": suite_trotter,
    "backends": suite_backends,
    "hygiene": suite_hygiene,
}


def run_suite(name):
    try:
        fn = SUITES[name]
    except KeyError:
        raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITES)} or 'all'") from None
    start = time.perf_counter()
    checks = fn()
    report = SuiteReport(name, checks, time.perf_counter() - start)
    log.info("suite %s: %s (%.1fs)", name, "pass" if report.passed else "FAIL", report.seconds)
    return report


def run(names):
    if names == "all" or names == ["all"]:
        names = list(SUITES)
    elif isinstance(names, str):
        names = [names]
    reports = [run_suite(n) for n in names]
    return {"all_passed": all(r.passed for r in reports), "suites": [r.to_dict() for r in reports]}
