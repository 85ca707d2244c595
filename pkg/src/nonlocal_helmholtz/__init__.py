"""Numerical verification toolkit for nonlocal Helmholtz-type eigenrelations.

Submodules
----------
specfun
    Bessel functions, spherical harmonics and classical Helmholtz solutions.
spectral
    Fourier-multiplier operators on periodic boxes.
quadrature
    Singular-integral evaluation of fractional Laplacians.
extension
    Weighted extension problems, Neumann traces and energy functionals.
bernstein
    Complete Bernstein multipliers, weights and A2 probes.
diffusion
    Monte Carlo hitting probabilities for the weighted diffusion.
harness
    Command-line verification runner and report generation.
"""
__version__ = "0.1.0"
