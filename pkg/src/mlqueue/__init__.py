"""Mittag-Leffler single-server queues: special functions, samplers, models, limits."""

__version__ = "0.1.0"
