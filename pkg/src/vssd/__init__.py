"""Non-causal state space duality kernels and the VSSD vision backbone."""

__version__ = "0.1.0"
