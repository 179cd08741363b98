"""Desk-scale simulator of emergent communication for numeric concepts:
the Bag-Select referential game, iterated-learning chains, and a
compositionality/learnability metrics suite."""

__version__ = "0.1.0"
