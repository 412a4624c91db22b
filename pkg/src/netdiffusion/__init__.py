"""Friendship-paradox based SIS diffusion models, polling estimators and filters."""

__version__ = "0.1.0"
