"""Parallel imaging + compressed sensing MRI reconstruction with SPIRiT regularization."""

__version__ = "0.1.0"
