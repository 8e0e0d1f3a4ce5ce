"""LLM-driven evolution of black-box optimizers with code-feature-guided mutation."""

__version__ = "0.1.0"
