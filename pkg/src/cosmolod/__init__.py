"""Octree level-of-detail preprocessing, streaming and rendering for particle data."""

__version__ = "0.1.0"
