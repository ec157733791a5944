"""Spike-timing designer - Core modules."""
