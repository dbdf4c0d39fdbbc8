"""Electrode design tools for merging and separating pairs of trapped ions."""

__version__ = "0.1.0"
