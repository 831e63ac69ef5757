"""
semeq - Semantic channel equalization between independently trained agents.
"""

__version__ = "0.1.0"
