"""Spike-timing designer - Core utilities."""
