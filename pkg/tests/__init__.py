"""Test suite for nls-lab."""
