"""Decoherence of spin-J systems: Lindblad and coherent-state POVM channels on the sphere."""

__version__ = "0.1.0"
