"""Command line interface for dctraj."""
