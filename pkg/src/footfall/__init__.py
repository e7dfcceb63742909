"""Elephant footfall detection, featurisation, classification and attribution."""

__version__ = "0.1.0"
