"""stationprint: audio fingerprints and recommendations for internet radio stations."""

__version__ = "0.1.0"
