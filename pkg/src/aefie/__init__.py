"""Augmented electric field integral equation solver on multipatch NURBS surfaces."""

__version__ = "0.1.0"
