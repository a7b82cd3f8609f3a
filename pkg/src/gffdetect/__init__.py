"""Multi-face video deepfake detection from geometric-fakeness features (GFF)."""

__version__ = "0.1.0"
