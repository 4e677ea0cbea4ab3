"""Sum-of-squares lower bounds transported to QMA(2) verifiers and
entangled games."""

__version__ = "0.1.0"
