"""Calibration and Monte Carlo verification of sampled suprema of self-similar processes."""

__version__ = "0.1.0"
