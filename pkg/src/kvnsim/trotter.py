"""Trotter compilation of KvN Hamiltonians into photonic gate schedules.

Gates are listed in the order in which they act on the state. Parameters are
integrated strengths (dimensionless); the step length ``dt = tau / p`` is
carried separately. Besides the Gaussian kinds documented in
:mod:`kvnsim.gaussian`, schedules may contain

==========  ==================================
kind        unitary
==========  ==================================
CUBIC       exp(+i g P_j Q_k^2), modes (j, k)
CUBIC_P     exp(+i g P_j^3), mode (j,)
CUBIC_Q     exp(+i g Q_j^3), mode (j,)
==========  ==================================
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ImaginaryFrequencyError, ScheduleError
from .gaussian import GAUSSIAN_KINDS, SymplecticGate, gate_for

GATE_KINDS = GAUSSIAN_KINDS + ("CUBIC", "CUBIC_P", "CUBIC_Q")
_ARITY = {"BS": 2, "TMS": 2, "CX": 2, "QQ": 2, "CUBIC": 2, "DISPLACE": 1, "CUBIC_P": 1, "CUBIC_Q": 1}


@dataclass(frozen=True)
class Gate:
    kind: str
    modes: tuple[int, ...]
    param: float

    def __post_init__(self):
        kind = self.kind.upper()
        if kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        modes = tuple(int(m) for m in self.modes)
        if len(modes) != _ARITY[kind]:
            raise ValueError(f"{kind} takes {_ARITY[kind]} mode(s), got {modes}")
        if len(set(modes)) != len(modes):
            raise ValueError(f"{kind} needs distinct modes, got {modes}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "param", float(self.param))

    @property
    def is_gaussian(self):
        return self.kind in GAUSSIAN_KINDS


@dataclass(frozen=True)
class GateSchedule:
    """``p`` repetitions of the same Trotter step."""

    n_modes: int
    p: int
    dt: float
    step_gates: tuple[Gate, ...]
    decomposition: str
    source_hash: str = ""

    def __post_init__(self):
        if self.p < 1:
            raise ScheduleError("p must be >= 1")
        for g in self.step_gates:
            if max(g.modes) >= self.n_modes or min(g.modes) < 0:
                raise ScheduleError(f"gate {g} references a mode outside 0..{self.n_modes - 1}")

    @property
    def gates(self):
        return self.step_gates * self.p

    @property
    def is_gaussian(self):
        return all(g.is_gaussian for g in self.step_gates)

    def count(self, kind):
        """Number of ``kind`` gates in one Trotter step."""
        return sum(1 for g in self.step_gates if g.kind == kind)

    def to_dict(self):
        return {
            "n_modes": self.n_modes,
            "p": self.p,
            "dt": self.dt,
            "decomposition": self.decomposition,
            "source_hash": self.source_hash,
            "gates": [{"kind": g.kind, "modes": list(g.modes), "param": g.param} for g in self.gates],
        }

    def to_json(self):
        return dump_json(self.to_dict())

    @classmethod
    def from_dict(cls, data):
        p = int(data["p"])
        gates = [Gate(g["kind"], tuple(g["modes"]), float(g["param"])) for g in data["gates"]]
        if len(gates) % p:
            raise ScheduleError(f"{len(gates)} gates cannot form {p} identical steps")
        per = len(gates) // p
        step = tuple(gates[:per])
        for r in range(1, p):
            if tuple(gates[r * per:(r + 1) * per]) != step:
                raise ScheduleError(f"Trotter step {r} differs from step 0")
        return cls(
            int(data["n_modes"]), p, float(data["dt"]), step,
            data.get("decomposition", ""), data.get("source_hash", ""),
        )

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _fmt(x):
    if isinstance(x, bool) or x is None:
        return json.dumps(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            raise ValueError("non-finite number cannot be written as JSON")
        text = format(x, ".17g")
        if "." not in text and "e" not in text and "inf" not in text:
            text += ".0"
        return text
    if isinstance(x, str):
        return json.dumps(x)
    if isinstance(x, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_fmt(v)}" for k, v in x.items()) + "}"
    if isinstance(x, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(v) for v in x) + "]"
    raise TypeError(f"cannot serialize {type(x).__name__}")


def dump_json(obj):
    """JSON text with every float written to 17 significant digits."""
    return _fmt(obj) + "\n"


def save_schedule(schedule, path):
    Path(path).write_text(schedule.to_json())


def load_schedule(path):
    return GateSchedule.from_json(Path(path).read_text())


# --- shape checks -------------------------------------------------------


def _require_linear_kvn(h, name):
    if not h.is_gaussian:
        raise ScheduleError(f"{name} expects a quadratic Hamiltonian")
    if np.any(h.linear):
        raise ScheduleError(f"{name} does not compile linear (displacement) terms")
    n = h.n_modes
    m = h.quadratic
    if np.any(m[:n, :n]) or np.any(m[n:, n:]):
        raise ScheduleError(f"{name} expects a KvN Hamiltonian (QQ and PP blocks must vanish)")
    return h.drift_matrix()


def _pair_gates(j, k, a_jk, a_kj, dt):
    """TMS then BS on (j, k) for ``a_jk P_j Q_k + a_kj Q_j P_k``."""
    return [
        Gate("TMS", (j, k), 0.5 * (a_jk + a_kj) * dt),
        Gate("BS", (j, k), 0.5 * (a_jk - a_kj) * dt),
    ]


def _check_ho(h, name):
    a = _require_linear_kvn(h, name)
    if h.n_modes != 2 or a[0, 0] != 0.0 or a[1, 1] != 0.0:
        raise ScheduleError(f"{name} expects the two-mode oscillator Hamiltonian")
    return a


def trotterize_cx(h, tau, p):
    """Two controlled-X gates per step: first the ``P_1 Q_2`` term, then ``Q_1 P_2``."""
    a = _check_ho(h, "trotterize_cx")
    p = int(p)
    dt = float(tau) / p
    step = (
        Gate("CX", (1, 0), a[0, 1] * dt),
        Gate("CX", (0, 1), a[1, 0] * dt),
    )
    return GateSchedule(2, p, dt, step, "cx", h.fingerprint())


def trotterize_tms_bs(h, tau, p):
    a = _check_ho(h, "trotterize_tms_bs")
    p = int(p)
    dt = float(tau) / p
    step = tuple(_pair_gates(0, 1, a[0, 1], a[1, 0], dt))
    return GateSchedule(2, p, dt, step, "tms_bs", h.fingerprint())


def trotterize_coupled(h, tau, p):
    """Independent oscillator pairs ``(j, j+n)`` first, then one TMS+BS pair
    per nonzero coupling term ``A[j+n, k] P_{j+n} Q_k`` on modes ``(k, j+n)``."""
    a = _require_linear_kvn(h, "trotterize_coupled")
    if h.n_modes % 2:
        raise ScheduleError("coupled network needs an even number of modes")
    n = h.n_modes // 2
    if np.any(a[:n, :n]) or np.any(a[n:, n:]):
        raise ScheduleError("position/momentum blocks of the drift must be off-diagonal")
    top = a[:n, n:]
    if np.any(top - np.diag(np.diag(top))):
        raise ScheduleError("velocity block must be diagonal (u_j' = u_{j+n}/m_j)")
    p = int(p)
    dt = float(tau) / p
    step = []
    for j in range(n):
        step += _pair_gates(j, j + n, a[j, j + n], a[j + n, j], dt)
    for j in range(n):
        for k in range(n):
            if k != j and a[j + n, k] != 0.0:
                step += _pair_gates(k, j + n, 0.0, a[j + n, k], dt)
    return GateSchedule(h.n_modes, p, dt, tuple(step), "coupled", h.fingerprint())


def cubic_coupling_sequence(j, k, strength, balance=2.0):
    """Nine gates whose product equals ``exp(i g P_j Q_k^2)`` exactly.

    With ``G(b) = exp(i b Q_j Q_k)`` and ``C(c) = exp(i c P_j^3)``,

        G(2b) C(c) G(-b) C(-c) G(-2b) C(c) G(b) C(-c) exp(6 i c b^3 Q_k^3)
            = exp(12 i c b^2 P_j Q_k^2).

    Only ``c b^2 = g/12`` is fixed. We take ``b = balance * (|g|/12)^(1/3)``:
    a weaker cubic gate spreads the intermediate states less in the Fock
    basis, at the cost of larger (cheap, Gaussian) ``Q_j Q_k`` couplings.
    Returned in acting order, i.e. right to left in the product above.
    """
    g = float(strength)
    b = balance * (abs(g) / 12.0) ** (1.0 / 3.0)
    c = g / (12.0 * b * b) if b > 0.0 else 0.0
    return _nine_gates(j, k, b, c, Gate("CUBIC_Q", (k,), 6.0 * c * b**3))


def literal_cubic_sequence(j, k, alpha, t):
    """The nine-gate sequence with the coefficients exactly as commonly quoted:

        G(2a) C(t) G(-a) C(-t) G(-2a) C(t) G(a) C(-t) exp(3/4 i a^3 t Q_j^3)

    intended to reproduce ``exp(3 i a t P_j Q_k^2)``. Its product is in fact
    ``exp(i(12 a^2 t P_j Q_k^2 - 6 a^3 t Q_k^3)) exp(3/4 i a^3 t Q_j^3)``;
    kept for comparison with :func:`cubic_coupling_sequence`.
    """
    return _nine_gates(j, k, float(alpha), float(t), Gate("CUBIC_Q", (j,), 0.75 * alpha**3 * t))


def _nine_gates(j, k, b, c, last):
    return [
        last,
        Gate("CUBIC_P", (j,), -c),
        Gate("QQ", (j, k), b),
        Gate("CUBIC_P", (j,), c),
        Gate("QQ", (j, k), -2.0 * b),
        Gate("CUBIC_P", (j,), -c),
        Gate("QQ", (j, k), -b),
        Gate("CUBIC_P", (j,), c),
        Gate("QQ", (j, k), 2.0 * b),
    ]


def trotterize_kdv(h, tau, p, expand_cubic=False):
    """Beamsplitter network for the Gaussian part, then the cubic couplings.

    The quadratic drift must be antisymmetric (pure beamsplitter couplings);
    one BS per unordered pair with nonzero net coefficient, ascending in
    ``(j, k)``. Each cubic term ``c P_j Q_k^2`` becomes ``CUBIC`` with
    ``g = -c dt`` or, with ``expand_cubic``, its nine-gate expansion.
    """
    if np.any(h.linear):
        raise ScheduleError("trotterize_kdv does not compile linear terms")
    n = h.n_modes
    m = h.quadratic
    if np.any(m[:n, :n]) or np.any(m[n:, n:]):
        raise ScheduleError("trotterize_kdv expects a KvN Hamiltonian")
    a = h.drift_matrix()
    if not np.allclose(a, -a.T, atol=1e-14, rtol=0):
        raise ScheduleError("Gaussian part is not beamsplitter-only (drift not antisymmetric)")
    p = int(p)
    dt = float(tau) / p
    step = []
    for j in range(n):
        for k in range(j + 1, n):
            if a[j, k] != 0.0:
                step.append(Gate("BS", (j, k), a[j, k] * dt))
    for j, k, l, c in sorted(h.cubic_terms):
        if c == 0.0:
            continue
        if k != l or k == j:
            raise ScheduleError(f"cubic term {(j, k, l)} is not of the form P_j Q_k^2 with j != k")
        g = -c * dt
        if expand_cubic:
            step += cubic_coupling_sequence(j, k, g)
        else:
            step.append(Gate("CUBIC", (j, k), g))
    name = "kdv_expanded" if expand_cubic else "kdv"
    return GateSchedule(n, p, dt, tuple(step), name, h.fingerprint())


def trotterize(h, decomposition, tau, p, expand_cubic=False):
    dispatch = {
        "cx": trotterize_cx,
        "tms_bs": trotterize_tms_bs,
        "coupled": trotterize_coupled,
    }
    if decomposition == "kdv":
        return trotterize_kdv(h, tau, p, expand_cubic)
    try:
        return dispatch[decomposition](h, tau, p)
    except KeyError:
        raise ScheduleError(f"unknown decomposition {decomposition!r}") from None


def schedule_symplectic(schedule):
    """Compose the Gaussian gates of a schedule into one symplectic map."""
    if not schedule.is_gaussian:
        raise ScheduleError("schedule contains non-Gaussian gates")
    step = SymplecticGate.identity(schedule.n_modes)
    for g in schedule.step_gates:
        step = step.then(gate_for(g.kind, g.modes, g.param, schedule.n_modes))
    total = SymplecticGate.identity(schedule.n_modes)
    for _ in range(schedule.p):
        total = total.then(step)
    return total


# --- OPO parameter mapping ------------------------------------------------


@dataclass(frozen=True)
class OpoParams:
    """Round-trip time ``tau`` [s], accumulated squeezing ``r`` over ``p``
    round trips, and beamsplitter (wave-plate) angle ``theta`` [rad]."""

    tau: float
    r: float
    theta: float
    p: int = 1

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.tau <= 0:
            raise ValueError("tau must be positive")

    @property
    def reflectivity(self):
        return math.cos(self.theta)

    @property
    def squeezing_db(self):
        return 20.0 * self.r / math.log(10.0)

    def to_dict(self):
        return {"tau": self.tau, "r": self.r, "theta": self.theta, "p": self.p}


def opo_params_from_oscillator(m, omega, tau, p=1):
    """``r/(p tau) = (1/m - m w^2)/2`` and ``theta/tau = (1/m + m w^2)/2``."""
    if m <= 0:
        raise ValueError("mass must be positive")
    r = p * tau * 0.5 * (1.0 / m - m * omega**2)
    theta = tau * 0.5 * (1.0 / m + m * omega**2)
    return OpoParams(tau=tau, r=r, theta=theta, p=p)


def oscillator_from_opo(params):
    """Invert the OPO map: ``m = tau/(theta + r/p)``, ``w = sqrt(theta^2 - (r/p)^2)/tau``."""
    rp = params.r / params.p
    disc = params.theta**2 - rp**2
    if disc <= 0:
        raise ImaginaryFrequencyError(
            f"theta^2 - (r/p)^2 = {disc:.3e} <= 0: no real oscillator frequency"
        )
    m = params.tau / (params.theta + rp)
    omega = math.sqrt(disc) / params.tau
    return m, omega
