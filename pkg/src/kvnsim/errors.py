"""Exception hierarchy shared across the package."""


class KvnError(Exception):
    """Base class for all kvnsim errors."""


class DimensionError(KvnError, ValueError):
    """Array or mode index does not match the declared dimension."""


class CapacityError(KvnError):
    """A truncated Fock space would exceed the configured size limit."""


class UnsupportedHamiltonianError(KvnError):
    """The Hamiltonian has terms the chosen backend cannot represent."""


class TruncationOverflowError(KvnError):
    """Probability mass at the Fock cutoff edge exceeded the threshold."""

    def __init__(self, leakage, threshold, where=""):
        self.leakage = float(leakage)
        self.threshold = float(threshold)
        msg = f"leakage {self.leakage:.3e} exceeds threshold {self.threshold:.3e}"
        if where:
            msg = f"{where}: {msg}"
        super().__init__(msg)


class ImaginaryFrequencyError(KvnError, ValueError):
    """OPO parameters with theta^2 <= (r/p)^2 give no real oscillator frequency."""


class BlowUpError(KvnError):
    """A classical integration produced a non-finite state."""

    def __init__(self, last_time, message="non-finite state encountered"):
        self.last_time = float(last_time)
        super().__init__(f"{message} (last finite time t={self.last_time:.6g})")


class ScheduleError(KvnError, ValueError):
    """A Hamiltonian does not have the shape a Trotter compiler expects."""


class ConfigError(KvnError, ValueError):
    """Invalid run configuration."""
