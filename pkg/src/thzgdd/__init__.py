"""Terahertz channel dispersion and link-level BER simulation."""

__version__ = "0.1.0"
