"""Test package for Mercer Lab."""
