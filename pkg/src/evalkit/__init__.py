"""Evaluation toolkit for long-form speech synthesis."""

__version__ = "0.1.0"
