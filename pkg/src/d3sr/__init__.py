"""Direct data domain STAP with sparse spectrum estimation."""

__version__ = "0.1.0"
