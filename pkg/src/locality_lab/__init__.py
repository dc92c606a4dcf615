"""Round-synchronous lab for random-shift decompositions, matching and vertex cover."""

__version__ = "0.1.0"
