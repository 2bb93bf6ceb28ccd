"""Analytic Gaussian-mixture targets and empirical measures."""
