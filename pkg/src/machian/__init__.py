"""Relational (Machian) classical and quantum mechanics."""

__version__ = "0.1.0"
