"""Test package for ultrasound depth-camera calibration."""
