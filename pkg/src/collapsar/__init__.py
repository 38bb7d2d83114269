"""Pseudospectral tools for the semirelativistic Hartree equation of boson-star collapse."""

__version__ = "0.1.0"
