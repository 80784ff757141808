"""Community-note generation, automation, and gated evaluation toolkit."""

__version__ = "0.1.0"
