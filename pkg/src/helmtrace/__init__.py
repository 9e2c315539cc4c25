"""Wavenumber-weighted trace norms on model geometries.

Spectral (Dirichlet-to-Neumann), Gagliardo-quadrature and finite-element
routes to the weighted H^{1/2} trace norms induced by the Helmholtz energy
norm, plus sweeps that measure the equivalence constants between them.
"""

__version__ = "0.1.0"
