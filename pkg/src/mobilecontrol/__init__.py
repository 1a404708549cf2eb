"""Simulation and control synthesis for 1D quasilinear parabolic equations
under multiplicative controls with moving support."""

__version__ = "0.1.0"
