"""Evolved Pauli-word quantum kernels for small, imbalanced binary classification."""

__version__ = "0.1.0"
