"""Execution sandbox for LLM-generated optimizer programs."""

__version__ = "0.1.0"
