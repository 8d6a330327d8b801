"""Hateful-user detection on social graphs."""
__version__ = "0.1.0"
