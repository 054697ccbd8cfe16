"""Chord integrals, chord measures and the discrete L_p chord Minkowski problem."""
__version__ = "0.1.0"
