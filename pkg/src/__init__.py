"""Minimum-power spike-timing stimulus designer."""

__version__ = "1.0.0"
__description__ = "Design minimum-power current stimuli that make a phase-model neuron spike at a target time"
