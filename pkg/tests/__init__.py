"""Test suite for the neuromorphic flow pipeline."""
