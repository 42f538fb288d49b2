"""Finite-element spectral lab for elasticity, Stokes and plate eigenproblems."""

__version__ = "0.1.0"
