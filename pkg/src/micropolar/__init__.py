"""Pseudo-spectral solver and verification harness for the 3D micropolar fluid system."""

__version__ = "0.1.0"
