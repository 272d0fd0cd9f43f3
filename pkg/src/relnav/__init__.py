"""Relative navigation of a noncooperative spacecraft with an adaptive UKF."""

__version__ = "0.1.0"
