"""Fast dictionary learning with compressed thresholding (IcTKM)."""

__version__ = "0.1.0"
