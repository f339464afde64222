"""
Knowledge-based antenna pattern extrapolation.

Forward radiation-pattern models over parametric design spaces, a recursive
configuration-search / excitation-least-squares inversion solver, and a
Temporal-orchestrated Monte Carlo harness for validating extrapolation
against simulated truth.
"""

__version__ = "0.1.0"
