"""Bright-state STIRAP propagation in a Lambda medium."""

__version__ = "0.1.0"
