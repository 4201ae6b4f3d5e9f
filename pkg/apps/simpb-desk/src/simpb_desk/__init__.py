"""Desk-scale hybrid 2D/3D multi-camera detector."""

__version__ = "0.1.0"
