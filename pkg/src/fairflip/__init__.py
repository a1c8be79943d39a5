"""Simulator and exact analyzer for almost-optimally fair coin flipping."""

__version__ = "0.1.0"
