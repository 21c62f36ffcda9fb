"""Coulomb-blockade conductance of fractional quantum Hall islands from edge CFT partition functions."""

__version__ = "0.1.0"
