"""Seedable simulator of a d-dimensional QSDC network with superdense coding and decoy photons."""

__version__ = "0.1.0"
