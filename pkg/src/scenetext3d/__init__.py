"""Synthetic scene-text image generation from 3D triangle-mesh scenes."""

__version__ = "0.1.0"
