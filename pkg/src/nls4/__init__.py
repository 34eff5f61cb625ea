"""Radial spectral simulator and verification lab for the fourth-order NLS with potential.

i u_t + Delta^2 u + V u + lambda |u|^{p-1} u = 0 on R^n, n >= 5, radial.
"""

__version__ = "0.1.0"
