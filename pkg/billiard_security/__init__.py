"""Billiard path construction and insecurity certification for convex tables"""

__version__ = "1.0.0"
