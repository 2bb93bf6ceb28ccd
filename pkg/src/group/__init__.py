"""Finite orthogonal group representations and symmetrization operators."""
