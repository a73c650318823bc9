"""Continuous quantum error correction testbed for the 3-qubit bit-flip code."""

__version__ = "0.1.0"
