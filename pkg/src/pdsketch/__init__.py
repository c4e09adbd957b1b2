"""Pseudo-deterministic streaming sketches and the harness that certifies them."""

__version__ = "0.1.0"
