"""qrep: one-click reproduction packages for quantum software experiments."""

__version__ = "0.1.0"
