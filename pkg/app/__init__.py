"""Mercer Lab: numerical experiments with integral operators."""

__version__ = "1.0.0"
