"""Online sensor scheduling for cooperative perception."""

__version__ = "0.1.0"
