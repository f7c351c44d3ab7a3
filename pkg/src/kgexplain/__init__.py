"""Explainable classification of knowledge-graph entities from mined
path features."""

__version__ = "0.1.0"
