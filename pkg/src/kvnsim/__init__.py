"""Koopman-von Neumann simulation of classical dynamics on photonic qumodes."""

__version__ = "0.1.0"
