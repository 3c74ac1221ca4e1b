"""Texture statistics from CNN feature correlations.

The package computes Gram-matrix texture representations from the feature
maps of a small built-in CNN inference engine, synthesizes textures by
minimizing a normalized Gram loss with L-BFGS, and evaluates how much
class structure those representations carry: representational
dissimilarity matrices, Ward clustering, mutual information against
ground-truth labels (plug-in and NSB-corrected), and Pearson correlation
against external benchmark scores.
"""

from texgram.errors import (
    TexgramError,
    BundleError,
    ConfigError,
    DataError,
    NumericalError,
)

__version__ = "0.1.0"

__all__ = [
    "TexgramError",
    "BundleError",
    "ConfigError",
    "DataError",
    "NumericalError",
    "__version__",
]
