"""Stein discrepancy, entropy and transport functionals with numerical inequality checks."""

__version__ = "0.1.0"
