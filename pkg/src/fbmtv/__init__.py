"""Truncated variation, level crossings and local time of sampled fBm."""

__version__ = "0.1.0"
