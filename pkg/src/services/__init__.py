"""Spike-timing designer - Design, simulation and verification services."""
