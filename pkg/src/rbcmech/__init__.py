"""Membrane mechanics simulator and Bayesian calibration toolkit for red blood cells."""

__version__ = "0.1.0"
