"""Harmonized cellular and distributed massive-MIMO resource allocation."""
__version__ = "0.1.0"
