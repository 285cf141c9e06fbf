"""Command-line tools for Mercer Lab."""
