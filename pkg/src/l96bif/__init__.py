"""Equivariant bifurcation toolkit for the monoscale Lorenz-96 model."""

from l96bif.model import (
    DimensionFactorization,
    ModelParams,
    SymmetrySignature,
    factorize_dimension,
    jacobian,
    lift,
    project,
    shift,
    symmetry_signature,
    trivial_equilibrium,
    vector_field,
)

__version__ = "0.1.0"

__all__ = [
    "DimensionFactorization",
    "ModelParams",
    "SymmetrySignature",
    "factorize_dimension",
    "jacobian",
    "lift",
    "project",
    "shift",
    "symmetry_signature",
    "trivial_equilibrium",
    "vector_field",
]
