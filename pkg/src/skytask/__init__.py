"""Telescope tasking workbench: orbit simulation, EKF tracking, and a
from-scratch double Q-network pointing policy."""

__version__ = "0.1.0"
