"""Quantum simulation of the linear to zig-zag transition in small ion crystals."""

__version__ = "0.1.0"
