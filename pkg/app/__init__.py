"""Integrity constraints over multi-context systems: equilibria, satisfaction checks, encodings and repairs."""
__version__ = "1.0.0"
