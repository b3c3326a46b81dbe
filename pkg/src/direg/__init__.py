"""Directional regularity of bivariate functional data."""
__version__ = "0.1.0"
