"""Spike-timing designer - Command-line interface."""
