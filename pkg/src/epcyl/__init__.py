"""Steady supersonic Euler-Poisson flows in three-dimensional cylinders.

Modules
-------
background       one-dimensional background flows
boundary_data    boundary profiles, compatibility checks, perturbation size
spectral_basis   Neumann eigenpairs of the disk and the square
weighted_norms   discrete weighted Sobolev norms
potential_solver Galerkin/Picard solver for irrotational perturbations
axisym_solver    axisymmetric solver with swirl
coercivity       energy-weight construction and certification
extension_ops    extension and mollification operators
cli_runner       the ``epcyl`` command line tool
"""

__version__ = "0.1.0"
