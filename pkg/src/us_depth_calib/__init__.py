"""Ultrasound image calibration with a depth camera."""

__version__ = "0.1.0"
