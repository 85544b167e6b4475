"""Desk-scale benchmark engine for multimodal product retrieval."""

__version__ = "0.1.0"
