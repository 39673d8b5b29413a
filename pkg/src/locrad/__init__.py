"""Locality-radius diagnostics for schema graph learning."""

__version__ = "0.1.0"
