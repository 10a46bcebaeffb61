"""Structure-preserving multibody dynamics in director coordinates.

The package models systems of rigid bodies coupled by kinematic pairs as
port-Hamiltonian differential-algebraic equations and integrates them with
an implicit midpoint scheme, optionally augmented for velocity-level
constraint enforcement.
"""

__version__ = "0.1.0"
