"""Experiment pipelines built from the numerical core."""
