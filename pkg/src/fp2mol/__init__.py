"""Fingerprint-to-structure decoding and de novo generation benchmarks."""

__version__ = "0.1.0"
