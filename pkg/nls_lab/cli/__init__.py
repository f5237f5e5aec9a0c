"""Command line interface for nls-lab."""
