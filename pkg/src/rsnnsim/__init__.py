"""Bit-exact spiking-RNN inference reference and accelerator cycle model."""

from . import accel, formats, golden, metrics, model

__version__ = "0.1.0"

__all__ = ["accel", "formats", "golden", "metrics", "model", "__version__"]
