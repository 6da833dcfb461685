"""Factored interactive trajectory prediction over synthetic driving scenarios."""

__version__ = "0.1.0"
