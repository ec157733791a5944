"""
Models package containing the phase-model definitions.
"""
