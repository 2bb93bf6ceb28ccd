"""Minimal dense-network engine: nets, reverse-mode graphs, optimizers, spectral normalization."""
