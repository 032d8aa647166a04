"""Attack-posture analysis for network telescope flow data."""

__version__ = "0.1.0"
