"""Desk-scale experiments on transport plans, semiclassical limits and fermionic wavefunctions."""

__version__ = "0.1.0"
