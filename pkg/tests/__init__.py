"""Crossmask test suite."""
