"""Radial cubic-quintic NLS threshold toolkit."""

__version__ = "0.1.0"
