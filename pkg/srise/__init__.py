"""Similarity-based randomized input sampling (S-RISE) saliency toolkit."""

__version__ = "1.0.0"
