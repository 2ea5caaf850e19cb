"""Finite-difference laboratory for the semilinear wave equation with
localized Kelvin-Voigt damping."""

__version__ = "0.1.0"
