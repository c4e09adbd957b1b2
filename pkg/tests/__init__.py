"""Test suite for pseudo-deterministic streaming sketches."""
