"""Numerics for discrete groups acting on complex hyperbolic space."""
__version__ = "0.1.0"
