"""Dimer and Ising partition functions on graphs embedded in the Klein bottle."""

__version__ = "0.1.0"
