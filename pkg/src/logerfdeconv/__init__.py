"""Unsupervised edge-preserving deconvolution with an explicitly normalized Gauss/Laplace field."""

__version__ = "0.1.0"
