"""Desk-scale numerical checks for Bochner-Riesz summation of Hermite expansions."""

__version__ = "0.1.0"
