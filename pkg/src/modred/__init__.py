"""Reductions among refutation, satisfiability and feasibility problems for modular lattices."""

__version__ = "0.1.0"
