"""Diagnostics engine for areal-unit effects in spatio-temporal flow prediction."""

__version__ = "0.1.0"
