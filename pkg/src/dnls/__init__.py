"""Split-step simulator and verification tools for the damped nonlinear
Schrodinger equation with time-dependent damping."""

__version__ = "0.1.0"
