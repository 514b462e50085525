"""Entity-centric data-to-text generation for game score tables."""

__version__ = "0.1.0"
