"""Prompt generation and constrained decoding for text-to-image art direction."""

__version__ = "0.1.0"
