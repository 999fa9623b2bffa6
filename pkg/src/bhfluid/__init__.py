"""Disorder-assisted adiabatic preparation of photon fluids in a Bose-Hubbard chain."""

__version__ = "0.1.0"
