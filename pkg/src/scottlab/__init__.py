"""Numerical laboratory for Thomas-Fermi theory, the Scott correction and the
operator inequalities behind them."""

__version__ = "0.1.0"
