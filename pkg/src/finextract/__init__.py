"""Generative financial event entity extraction toolkit."""

__version__ = "0.1.0"
